"""Command line front end.

Subcommands map one-to-one onto the drivers in :mod:`biteplan.runner`.
Exit codes: 0 success, 2 bad config or arguments, 3 no feasible goal,
4 start pose rejected, 5 planner found no trajectory.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .config import ScenarioConfig, load_config
from .errors import (ConfigError, InfeasibleGoalError, InvalidSpecError,
                     InvalidStartError, NoTrajectoryError)
from .runner import (run_calibration_demo, run_multibite, run_scenario,
                     run_sweep)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE_GOAL = 3
EXIT_INVALID_START = 4
EXIT_NO_TRAJECTORY = 5


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _dump(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "mode", None) is not None:
        cfg = replace(cfg, weights=cfg.weights.with_mode(args.mode))
    if getattr(args, "k_goals", None) is not None:
        cfg = replace(cfg, k_goals=args.k_goals)
    if getattr(args, "stop_fraction", None) is not None:
        cfg = replace(cfg, multibite=replace(
            cfg.multibite, stop_fraction=args.stop_fraction))
    return cfg


def _load(args) -> ScenarioConfig:
    return _apply_overrides(load_config(args.config), args)


def cmd_plan(args) -> int:
    report = run_scenario(_load(args))
    _emit(_dump(report), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    csv_text, summary = run_sweep(_load(args), workers=args.workers)
    _emit(csv_text, args.out)
    if args.summary_out:
        with open(args.summary_out, "w") as f:
            f.write(_dump(summary))
    return EXIT_OK


def cmd_multibite(args) -> int:
    report = run_multibite(_load(args))
    _emit(_dump(report), args.out)
    return EXIT_OK


def cmd_calib(args) -> int:
    report = run_calibration_demo(noise_sigma=args.noise_sigma,
                                  seed=args.seed if args.seed is not None
                                  else 0)
    _emit(_dump(report), args.out)
    return EXIT_OK


def cmd_validate_config(args) -> int:
    cfg = load_config(args.config)
    _emit(_dump({"valid": True, "config": cfg.to_dict()}), args.out)
    return EXIT_OK


def _add_common(p, config=True):
    if config:
        p.add_argument("config", help="scenario file (.toml or .json)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the run seed")
    p.add_argument("--out", default=None,
                   help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biteplan",
        description="Plan bite-transfer trajectories over mesh foods.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="sample goals, plan, report the best")
    _add_common(p)
    p.add_argument("--mode", choices=("distance", "efficiency", "comfort",
                                      "combined"), default=None,
                   help="override the cost mode")
    p.add_argument("--k-goals", type=int, default=None,
                   help="override how many goal medoids to plan against")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="grid sweep over cost weights (CSV)")
    _add_common(p)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: BITEPLAN_WORKERS or 1)")
    p.add_argument("--summary-out", default=None,
                   help="also write the JSON summary here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("multibite", help="bite until the food is gone")
    _add_common(p)
    p.add_argument("--mode", choices=("distance", "efficiency", "comfort",
                                      "combined"), default=None,
                   help="override the cost mode")
    p.add_argument("--stop-fraction", type=float, default=None,
                   help="stop once remaining/initial volume drops below this")
    p.set_defaults(func=cmd_multibite)

    p = sub.add_parser("calib", help="synthetic wrench calibration demo")
    _add_common(p, config=False)
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   help="measurement noise to inject (N / N*m)")
    p.set_defaults(func=cmd_calib)

    p = sub.add_parser("validate-config",
                       help="parse a scenario file, print canonical form")
    p.add_argument("config", help="scenario file (.toml or .json)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidSpecError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleGoalError as err:
        print(f"error: no feasible goal: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE_GOAL
    except InvalidStartError as err:
        print(f"error: invalid start: {err}", file=sys.stderr)
        return EXIT_INVALID_START
    except NoTrajectoryError as err:
        print(f"error: no trajectory: {err}", file=sys.stderr)
        return EXIT_NO_TRAJECTORY


if __name__ == "__main__":
    sys.exit(main())
