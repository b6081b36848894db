"""Force/torque calibration and deadband admittance control.

The sensor sits behind the fork with a fixed rotation relative to the
end effector; the skewered food hangs a lever arm along the end
effector's +y. Readings at several orientations give a linear system in
the seven unknowns (mass, force bias, torque bias); compensation then
removes bias and the predicted gravity wrench from live readings. The
admittance law is a per-axis PID on deadbanded force error.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidSpecError
from .geom.pose import quat_from_axis_angle, quat_to_matrix

GRAVITY = 9.80665


@dataclass(frozen=True)
class FTSample:
    """One sensor reading at a known end-effector orientation."""

    orientation: np.ndarray    # unit quaternion (w, x, y, z), ee -> world
    force: np.ndarray          # N, sensor frame
    torque: np.ndarray         # N*m, sensor frame

    def __post_init__(self):
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        f = np.asarray(self.force, dtype=np.float64).reshape(3)
        t = np.asarray(self.torque, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise InvalidSpecError("orientation quaternion must be unit")
        object.__setattr__(self, "orientation", q)
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)


@dataclass
class CalibrationResult:
    mass: float
    force_bias: np.ndarray
    torque_bias: np.ndarray
    residual_rms: float
    condition_number: float
    mass_clamped: bool = False
    ill_conditioned: bool = False

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "force_bias": [float(v) for v in self.force_bias],
            "torque_bias": [float(v) for v in self.torque_bias],
            "residual_rms": self.residual_rms,
            "condition_number": self.condition_number,
            "mass_clamped": self.mass_clamped,
            "ill_conditioned": self.ill_conditioned,
        }


def build_calibration_system(samples: Sequence[FTSample],
                             sensor_rotation: np.ndarray,
                             torque_radius: float,
                             gravity: float = GRAVITY
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Stack force and torque balances into A x = b with x = (m, f_b, t_b).

    Per sample: the sensor sees gravity mapped through the end-effector
    rotation (lever arm (0, r, 0) for the torque rows) minus the biases,
    so the force rows are [S R_i^T g_dir | -I | 0] and the torque rows
    [S ((0,r,0) x R_i^T g_dir) | 0 | -I].
    """
    if len(samples) < 3:
        raise InsufficientDataError(
            f"calibration needs at least 3 samples, got {len(samples)}")
    s_rot = np.asarray(sensor_rotation, dtype=np.float64).reshape(3, 3)
    g_world = np.array([0.0, 0.0, -gravity])
    lever = np.array([0.0, float(torque_radius), 0.0])
    n = len(samples)
    a = np.zeros((6 * n, 7))
    b = np.empty(6 * n)
    eye = np.eye(3)
    for i, smp in enumerate(samples):
        r_ee = quat_to_matrix(smp.orientation)
        g_ee = r_ee.T @ g_world              # unit-mass gravity, ee frame
        fr = slice(6 * i, 6 * i + 3)
        tr = slice(6 * i + 3, 6 * i + 6)
        a[fr, 0] = s_rot @ g_ee
        a[fr, 1:4] = -eye
        a[tr, 0] = s_rot @ np.cross(lever, g_ee)
        a[tr, 4:7] = -eye
        b[fr] = smp.force
        b[tr] = smp.torque
    return a, b


def solve_calibration(samples: Sequence[FTSample],
                      sensor_rotation: np.ndarray, torque_radius: float,
                      gravity: float = GRAVITY) -> CalibrationResult:
    """Least-squares fit of mass and biases, with conditioning checks."""
    a, b = build_calibration_system(samples, sensor_rotation, torque_radius,
                                    gravity)
    x, _, _, svals = np.linalg.lstsq(a, b, rcond=None)
    resid = a @ x - b
    rms = float(np.sqrt(np.mean(resid * resid)))
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0.0 else np.inf
    mass = float(x[0])
    clamped = mass < 0.0
    return CalibrationResult(
        mass=max(mass, 0.0),
        force_bias=x[1:4].copy(),
        torque_bias=x[4:7].copy(),
        residual_rms=rms,
        condition_number=cond,
        mass_clamped=clamped,
        ill_conditioned=cond > 1e8)


def compensate_wrench(reading: FTSample, calib: CalibrationResult,
                      sensor_rotation: np.ndarray, torque_radius: float,
                      gravity: float = GRAVITY
                      ) -> tuple[np.ndarray, np.ndarray]:
    """External wrench in the world frame, gravity and bias removed."""
    s_rot = np.asarray(sensor_rotation, dtype=np.float64).reshape(3, 3)
    r_ee = quat_to_matrix(reading.orientation)
    g_ee = r_ee.T @ np.array([0.0, 0.0, -gravity * calib.mass])
    lever = np.array([0.0, float(torque_radius), 0.0])
    f_ee = s_rot.T @ (reading.force + calib.force_bias) - g_ee
    t_ee = s_rot.T @ (reading.torque + calib.torque_bias) \
        - np.cross(lever, g_ee)
    return r_ee @ f_ee, r_ee @ t_ee


def synthetic_readings(mass: float, force_bias, torque_bias,
                       orientations: Sequence[np.ndarray],
                       sensor_rotation: np.ndarray, torque_radius: float,
                       gravity: float = GRAVITY, noise_sigma: float = 0.0,
                       rng: np.random.Generator | None = None,
                       external_force_world=None) -> list[FTSample]:
    """Forward model: what the sensor reads for known parameters.

    The calibration tests treat this generator as the ground truth;
    optional Gaussian noise and an optional external world-frame force
    exercise the statistical and compensation paths.
    """
    if noise_sigma > 0.0 and rng is None:
        raise InvalidSpecError("noise requires a generator")
    s_rot = np.asarray(sensor_rotation, dtype=np.float64).reshape(3, 3)
    f_b = np.asarray(force_bias, dtype=np.float64).reshape(3)
    t_b = np.asarray(torque_bias, dtype=np.float64).reshape(3)
    lever = np.array([0.0, float(torque_radius), 0.0])
    f_ext = np.zeros(3) if external_force_world is None else \
        np.asarray(external_force_world, dtype=np.float64).reshape(3)
    out = []
    for q in orientations:
        r_ee = quat_to_matrix(np.asarray(q, dtype=np.float64))
        g_ee = r_ee.T @ np.array([0.0, 0.0, -gravity * mass])
        sensed = r_ee.T @ f_ext
        force = s_rot @ (g_ee + sensed) - f_b
        torque = s_rot @ np.cross(lever, g_ee) - t_b
        if noise_sigma > 0.0:
            force = force + rng.normal(0.0, noise_sigma, 3)
            torque = torque + rng.normal(0.0, noise_sigma, 3)
        out.append(FTSample(orientation=q, force=force, torque=torque))
    return out


def default_calibration_orientations() -> list[np.ndarray]:
    """Six poses spanning +/- rotations about two axes (plus identity
    and a flip) so the system is comfortably full rank."""
    x, y = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)
    half = np.pi / 2.0
    return [
        np.array([1.0, 0.0, 0.0, 0.0]),
        quat_from_axis_angle(x, half),
        quat_from_axis_angle(x, -half),
        quat_from_axis_angle(y, half),
        quat_from_axis_angle(y, -half),
        quat_from_axis_angle(x, np.pi),
    ]


# -- deadband PID admittance ------------------------------------------------

def deadband_error(force, threshold: float = 0.25):
    """Zero inside [-threshold, threshold], linear with unit slope
    outside; continuous and odd. Works per axis on arrays."""
    if threshold <= 0.0:
        raise InvalidSpecError("deadband threshold must be positive")
    f = np.asarray(force, dtype=np.float64)
    e = np.minimum(f + threshold, np.maximum(f - threshold, 0.0))
    return float(e) if np.ndim(force) == 0 else e


@dataclass(frozen=True)
class PidState:
    """Gains plus running state for the admittance loop.

    Defaults give roughly a 2 cm/s retreat for a 1 N violation; the
    integral contribution is clamped to ``i_max`` to stop windup.
    """

    kp: float = 0.02
    ki: float = 0.001
    kd: float = 0.0005
    f_threshold: float = 0.25
    dt: float = 0.02
    i_max: float = 0.05
    integral: np.ndarray = None
    prev_error: np.ndarray = None

    def __post_init__(self):
        if self.f_threshold <= 0.0 or self.dt <= 0.0:
            raise InvalidSpecError("f_threshold and dt must be positive")
        if self.integral is None:
            object.__setattr__(self, "integral", np.zeros(3))
        if self.prev_error is None:
            object.__setattr__(self, "prev_error", np.zeros(3))


def pid_step(state: PidState, error) -> tuple[np.ndarray, PidState]:
    """One admittance tick: velocity command plus the updated state.

    Rectangle-rule integral (updated before use), backward-difference
    derivative. The integral is clamped so its velocity contribution
    stays within +/- i_max.
    """
    e = np.asarray(error, dtype=np.float64).reshape(3)
    integral = state.integral + e * state.dt
    if state.ki > 0.0:
        lim = state.i_max / state.ki
        integral = np.clip(integral, -lim, lim)
    deriv = (e - state.prev_error) / state.dt
    v = state.kp * e + state.ki * integral + state.kd * deriv
    return v, replace(state, integral=integral, prev_error=e)


def follow_or_admit(trajectory_velocity, error, pid_velocity) -> np.ndarray:
    """Trajectory following yields to admittance whenever the deadbanded
    force error is nonzero."""
    e = np.asarray(error, dtype=np.float64)
    if np.any(e != 0.0):
        return np.asarray(pid_velocity, dtype=np.float64)
    return np.asarray(trajectory_velocity, dtype=np.float64)


# -- serialization ----------------------------------------------------------

_CSV_HEADER = ["t", "qw", "qx", "qy", "qz", "fx", "fy", "fz",
               "tx", "ty", "tz"]


def samples_to_csv(samples: Sequence[FTSample],
                   times: Sequence[float] | None = None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(_CSV_HEADER)
    for i, smp in enumerate(samples):
        t = times[i] if times is not None else float(i)
        row = [t, *smp.orientation, *smp.force, *smp.torque]
        wr.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()


def samples_from_csv(text: str) -> tuple[list[FTSample], list[float]]:
    rd = csv.reader(io.StringIO(text))
    header = next(rd)
    if header != _CSV_HEADER:
        raise InvalidSpecError(f"unexpected CSV header: {header}")
    samples, times = [], []
    for row in rd:
        vals = [float(v) for v in row]
        times.append(vals[0])
        samples.append(FTSample(orientation=np.array(vals[1:5]),
                                force=np.array(vals[5:8]),
                                torque=np.array(vals[8:11])))
    return samples, times
