"""CLI behavior: exit codes, output shaping, determinism, overrides.

Subprocess tests run the module with ``python -m`` so they see the same
interpreter and installed package as the test process. Reports carry
wall-clock times under a single "timings" key; determinism checks strip
that key and compare a canonical re-dump byte for byte.
"""

import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

import biteplan.cli as cli
from biteplan.errors import NoTrajectoryError

_LEAN = """
[food]
kind = "carrot"
segments = 24

[food.dimensions]
radius = 0.006
height = 0.05

[weights]
mode = "combined"

[planner]
max_iters = 1500
smoothing_iters = 30

[sampling]
target_n = 40
batch_size = 64
max_batches = 60

[comfort_rays]
grid_n = 10
grid_m = 10

[run]
seed = 0
k_goals = 3
label = "lean"

[sweep]
beta_e_grid = [0.0, 4.0]
beta_c_grid = [10.0]
scenarios_per_cell = 2
"""


@pytest.fixture(scope="module")
def lean_cfg(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "lean.toml"
    p.write_text(_LEAN)
    return str(p)


def _canonical(path: Path) -> str:
    """Report with the timings block removed, re-dumped canonically."""
    doc = json.loads(path.read_text())
    doc.pop("timings", None)
    return json.dumps(doc, sort_keys=True)


def _run_module(args, cwd=None):
    return subprocess.run([sys.executable, "-m", "biteplan.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


# -- plan ----------------------------------------------------------------

def test_plan_report_validates_against_schema(lean_cfg, tmp_path):
    out = tmp_path / "report.json"
    assert cli.main(["plan", lean_cfg, "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    schema = json.loads(
        (Path(cli.__file__).parent / "schemas" / "run_report.schema.json")
        .read_text())
    jsonschema.validate(report, schema)
    assert report["schema"] == "biteplan.run_report/1"
    assert report["label"] == "lean"
    assert report["selected"]["metrics"]["n_waypoints"] >= 2


def test_plan_subprocess_byte_deterministic(lean_cfg, tmp_path):
    outs = []
    for i in range(3):
        out = tmp_path / f"run{i}.json"
        proc = _run_module(["plan", lean_cfg, "--out", str(out)])
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout == ""
        outs.append(_canonical(out))
    assert outs[0] == outs[1] == outs[2]


def test_plan_writes_stdout_without_out_flag(lean_cfg, capsys):
    assert cli.main(["plan", lean_cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == "biteplan.run_report/1"


def test_plan_mode_and_k_goals_and_seed_overrides(lean_cfg, tmp_path):
    out = tmp_path / "o.json"
    assert cli.main(["plan", lean_cfg, "--mode", "efficiency",
                     "--k-goals", "2", "--seed", "123",
                     "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["mode"] == "efficiency"
    assert report["seed"] == 123
    assert len(report["goals"]) == 2


# -- multibite -----------------------------------------------------------

def test_multibite_deterministic_and_stop_fraction_override(lean_cfg, tmp_path):
    canon = []
    for i in range(2):
        out = tmp_path / f"mb{i}.json"
        assert cli.main(["multibite", lean_cfg, "--out", str(out)]) == 0
        canon.append(_canonical(out))
    assert canon[0] == canon[1]
    report = json.loads((tmp_path / "mb0.json").read_text())
    assert report["schema"] == "biteplan.multibite_report/1"
    assert report["n_bites"] >= 1
    assert report["consumed_fraction"] >= 0.95

    out = tmp_path / "mb_stop.json"
    assert cli.main(["multibite", lean_cfg, "--stop-fraction", "0.9",
                     "--out", str(out)]) == 0
    light = json.loads(out.read_text())
    assert light["stop_fraction"] == 0.9
    assert light["n_bites"] <= report["n_bites"]


# -- sweep ---------------------------------------------------------------

def test_sweep_csv_deterministic_and_worker_invariant(lean_cfg, tmp_path):
    texts = []
    for i, workers in enumerate((1, 1, 2)):
        out = tmp_path / f"sweep{i}.csv"
        summary = tmp_path / f"summary{i}.json"
        assert cli.main(["sweep", lean_cfg, "--workers", str(workers),
                         "--out", str(out),
                         "--summary-out", str(summary)]) == 0
        texts.append(out.read_text())
    # CSV carries no timings, so the whole text must match; a 2-worker
    # pool must not change a single byte either.
    assert texts[0] == texts[1] == texts[2]

    header = texts[0].splitlines()[0].split(",")
    assert header[0] == "cell_index" and "mean_comfort" in header
    assert len(texts[0].splitlines()) == 1 + 2  # header + 2 cells

    summary = json.loads((tmp_path / "summary0.json").read_text())
    assert summary["schema"] == "biteplan.sweep_summary/1"
    assert summary["n_cells"] == 2
    assert len(summary["cells"]) == 2
    assert all(c["n_success"] >= 1 for c in summary["cells"])


# -- calib ---------------------------------------------------------------

def test_calib_noiseless_exact_and_deterministic(tmp_path):
    canon = []
    for i in range(3):
        out = tmp_path / f"c{i}.json"
        proc = _run_module(["calib", "--out", str(out)])
        assert proc.returncode == 0, proc.stderr
        canon.append(_canonical(out))
    assert canon[0] == canon[1] == canon[2]
    report = json.loads((tmp_path / "c0.json").read_text())
    assert report["schema"] == "biteplan.calibration_report/1"
    assert report["max_abs_error"] <= 1e-9
    assert report["within_3_sigma"] is True


def test_calib_noise_and_seed_flags(tmp_path):
    out = tmp_path / "cn.json"
    assert cli.main(["calib", "--noise-sigma", "0.01", "--seed", "3",
                     "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["seed"] == 3
    assert report["noise_sigma"] == 0.01
    assert report["max_abs_error"] > 0.0
    assert isinstance(report["within_3_sigma"], bool)


def test_calib_negative_noise_is_config_error(capsys):
    assert cli.main(["calib", "--noise-sigma", "-0.5"]) == cli.EXIT_CONFIG
    assert capsys.readouterr().err.startswith("error:")


# -- validate-config -----------------------------------------------------

@pytest.mark.parametrize("name", ["defaults.toml", "vertical_carrot.toml"])
def test_validate_config_on_shipped_files(name, tmp_path):
    path = Path(__file__).resolve().parents[1] / "configs" / name
    out = tmp_path / "v.json"
    assert cli.main(["validate-config", str(path), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["valid"] is True
    assert doc["config"]["run"]["seed"] == 0


def test_console_script_entry_point(tmp_path):
    cfg = tmp_path / "min.toml"
    cfg.write_text('[food]\nkind = "celery"\n')
    proc = subprocess.run(["biteplan", "validate-config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["valid"] is True


# -- exit codes ----------------------------------------------------------

def test_exit_2_missing_file(capsys):
    assert cli.main(["plan", "/nonexistent/x.toml"]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_exit_2_bad_toml(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("food = [\n")
    assert cli.main(["plan", str(p)]) == 2
    assert "error:" in capsys.readouterr().err


def test_exit_2_unknown_key(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[food]\nkind = \"carrot\"\nflavour = 3\n")
    assert cli.main(["plan", str(p)]) == 2
    err = capsys.readouterr().err
    assert "unknown key" in err


def test_exit_3_infeasible_goal(tmp_path, capsys):
    p = tmp_path / "tiny_mouth.toml"
    p.write_text("""
[food]
kind = "carrot"

[mouth]
radii = [1e-4, 1e-4]

[sampling]
target_n = 5
batch_size = 16
max_batches = 3
""")
    assert cli.main(["plan", str(p)]) == 3
    assert "no feasible goal" in capsys.readouterr().err


def test_exit_4_invalid_start(tmp_path, capsys):
    p = tmp_path / "bad_start.toml"
    p.write_text("""
[food]
kind = "carrot"

[start]
translation = [0.0, 0.0, -0.02]
quaternion = [1.0, 0.0, 0.0, 0.0]

[sampling]
target_n = 10
batch_size = 32
""")
    assert cli.main(["plan", str(p)]) == 4
    assert "invalid start" in capsys.readouterr().err


def test_exit_5_no_trajectory(lean_cfg, monkeypatch, capsys):
    def boom(config):
        raise NoTrajectoryError("forced for the test")
    monkeypatch.setattr(cli, "run_scenario", boom)
    assert cli.main(["plan", lean_cfg]) == 5
    assert "no trajectory" in capsys.readouterr().err
