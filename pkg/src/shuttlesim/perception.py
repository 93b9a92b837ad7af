"""Camera field of view, motion-dependent detection/noise model, and its fit.

Camera frame convention: x along the optical axis, y left, z up.  A camera
``orientation`` is the world-to-camera rotation matrix, so a world point
``p`` has camera coordinates ``R @ (p - position)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import ShuttleState

DEFAULT_LATENCY = (0.06, 0.16)
STD_FLOOR = 1e-4
FOV_TOL = 1e-12


class NoiseFitError(ValueError):
    """The noise-model regression is not identifiable from the samples."""


def rotation_from_yaw_pitch(yaw: float, pitch: float) -> np.ndarray:
    """World-to-camera rotation for a roll-free camera; positive pitch looks up."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    # columns of the camera-to-world matrix are the camera axes in world
    fwd = (cy * cp, sy * cp, sp)
    left = (-sy, cy, 0.0)
    up = (-cy * sp, -sy * sp, cp)
    return np.array([fwd, left, up])


def rotation_looking_at(direction: Sequence[float]) -> np.ndarray:
    d = np.asarray(direction, float)
    yaw = math.atan2(d[1], d[0])
    pitch = math.atan2(d[2], math.hypot(d[0], d[1]))
    return rotation_from_yaw_pitch(yaw, pitch)


def rotvec_to_matrix(w: Sequence[float]) -> np.ndarray:
    """Rodrigues: rotation matrix for rotation vector ``w``."""
    w = np.asarray(w, float)
    th = float(np.linalg.norm(w))
    if th < 1e-15:
        return np.eye(3)
    k = w / th
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(th) * K + (1 - math.cos(th)) * (K @ K)


@dataclass(frozen=True, eq=False)
class CameraModel:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    h_fov: float = math.radians(110.0)
    v_fov: float = math.radians(70.0)
    frame_rate: float = 60.0
    latency_range: tuple[float, float] = DEFAULT_LATENCY

    def __post_init__(self):
        pos = np.array(self.position, dtype=float)
        rot = np.array(self.orientation, dtype=float)
        if pos.shape != (3,) or rot.shape != (3, 3):
            raise ValueError("camera position must be a 3-vector and orientation 3x3")
        if not (0 < self.h_fov < math.pi and 0 < self.v_fov < math.pi):
            raise ValueError("fov angles must lie in (0, pi)")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be > 0")
        lo, hi = (float(x) for x in self.latency_range)
        if not 0 <= lo <= hi:
            raise ValueError(f"latency_range must satisfy 0 <= lo <= hi, got {self.latency_range}")
        pos.flags.writeable = False
        rot.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", rot)
        object.__setattr__(self, "latency_range", (lo, hi))

    def to_camera(self, p: Sequence[float]) -> np.ndarray:
        return self.orientation @ (np.asarray(p, float) - self.position)


@dataclass(frozen=True)
class NoiseModel:
    """Linear detection probability and measurement std in (distance, angular rate)."""

    detect_intercept: float = 1.05
    detect_per_distance: float = -0.03
    detect_per_angvel: float = -0.05
    std_intercept: float = 0.02
    std_per_distance: float = 0.004
    std_per_angvel: float = 0.01
    std_floor: float = STD_FLOOR
    # along-bearing std over cross-bearing std; 1 is isotropic
    range_std_ratio: float = 1.0

    def __post_init__(self):
        if not self.std_floor > 0:
            raise ValueError("std_floor must be > 0")
        if not self.range_std_ratio > 0:
            raise ValueError("range_std_ratio must be > 0")

    def to_dict(self) -> dict:
        d = {
            "detect": {
                "intercept": self.detect_intercept,
                "per_distance": self.detect_per_distance,
                "per_angvel": self.detect_per_angvel,
            },
            "noise_std": {
                "intercept": self.std_intercept,
                "per_distance": self.std_per_distance,
                "per_angvel": self.std_per_angvel,
            },
        }
        if self.range_std_ratio != 1.0:
            d["range_std_ratio"] = self.range_std_ratio
        return d

    @classmethod
    def from_dict(cls, d: dict, std_floor: float = STD_FLOOR) -> "NoiseModel":
        try:
            det, std = d["detect"], d["noise_std"]
            return cls(
                float(det["intercept"]), float(det["per_distance"]), float(det["per_angvel"]),
                float(std["intercept"]), float(std["per_distance"]), float(std["per_angvel"]),
                float(d.get("std_floor", std_floor)),
                float(d.get("range_std_ratio", 1.0)),
            )
        except KeyError as exc:
            raise KeyError(f"noise model missing key {exc}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NoiseModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class Measurement:
    t_capture: float
    t_available: float
    p_meas: np.ndarray
    std: float | None = None

    def __post_init__(self):
        p = np.array(self.p_meas, dtype=float)
        p.flags.writeable = False
        object.__setattr__(self, "p_meas", p)
        if self.t_available < self.t_capture:
            raise ValueError("measurement available before it was captured")

    def to_dict(self) -> dict:
        return {"t_capture": self.t_capture, "t_available": self.t_available,
                "p": self.p_meas.tolist(), "std": self.std}


class CameraTrack:
    """Scripted camera motion sampled on a time grid.

    Between samples the position is interpolated linearly and the
    orientation is advanced from the earlier sample by its angular velocity.
    ``angular_velocity`` is the camera body rate expressed in the world frame.
    """

    def __init__(self, camera: CameraModel, times, positions, orientations, angular_velocity, velocity=None):
        self.camera = camera
        self.times = np.asarray(times, float)
        self.positions = np.asarray(positions, float).reshape(-1, 3)
        self.orientations = np.asarray(orientations, float).reshape(-1, 3, 3)
        self.angular_velocity = np.asarray(angular_velocity, float).reshape(-1, 3)
        n = len(self.times)
        if n == 0 or not (len(self.positions) == len(self.orientations) == len(self.angular_velocity) == n):
            raise ValueError("camera track arrays must be non-empty and equally long")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("camera track timestamps must be strictly increasing")
        if velocity is None:
            velocity = np.zeros((n, 3))
            if n > 1:
                velocity = np.gradient(self.positions, self.times, axis=0)
        self.velocity = np.asarray(velocity, float).reshape(-1, 3)
        if len(self.velocity) != n:
            raise ValueError("camera track velocity must match the timestamps")

    @classmethod
    def static(cls, camera: CameraModel, t0: float = 0.0, t1: float = 1e6) -> "CameraTrack":
        return cls(camera, [t0, t1], [camera.position] * 2, [camera.orientation] * 2, np.zeros((2, 3)))

    def _index(self, t: float) -> int:
        if t < self.times[0] - 1e-9 or t > self.times[-1] + 1e-9:
            raise ValueError(f"t={t} outside camera track span [{self.times[0]}, {self.times[-1]}]")
        k = int(np.searchsorted(self.times, t + 1e-9, side="right") - 1)
        return min(max(k, 0), len(self.times) - 1)

    def kinematics(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(position, world-to-camera rotation, angular velocity, linear velocity) at ``t``."""
        k = self._index(t)
        dt = t - self.times[k]
        if abs(dt) <= 1e-9 or k == len(self.times) - 1:
            return self.positions[k], self.orientations[k], self.angular_velocity[k], self.velocity[k]
        s = dt / (self.times[k + 1] - self.times[k])
        pos = (1 - s) * self.positions[k] + s * self.positions[k + 1]
        # R_wc(t) = R_wc(t_k) @ exp(-[w]dt): body rotates by w*dt in world
        rot = self.orientations[k] @ rotvec_to_matrix(-self.angular_velocity[k] * dt)
        return pos, rot, self.angular_velocity[k], self.velocity[k]

    def camera_at(self, t: float) -> CameraModel:
        pos, rot, _, _ = self.kinematics(t)
        return replace(self.camera, position=pos, orientation=rot)


# --- operations --------------------------------------------------------------


def _in_fov_camera_frame(r: np.ndarray, h_fov: float, v_fov: float) -> bool:
    if not np.all(np.isfinite(r)) or r[0] <= 0:
        return False
    az = math.atan2(r[1], r[0])
    el = math.atan2(r[2], r[0])
    return abs(az) <= h_fov / 2 + FOV_TOL and abs(el) <= v_fov / 2 + FOV_TOL


def in_fov(cam: CameraModel, p: Sequence[float]) -> bool:
    """True iff ``p`` is in front of the camera inside the closed rectangular FOV."""
    return _in_fov_camera_frame(cam.to_camera(p), cam.h_fov, cam.v_fov)


def _los_rate(r: np.ndarray, v_rel: np.ndarray, omega: np.ndarray) -> float:
    dist = math.hypot(*r)  # no underflow for tiny offsets
    if dist == 0.0:
        raise ValueError("target coincides with camera position")
    u = r / dist
    w_rel = np.cross(u, v_rel) / dist - omega
    w_perp = w_rel - np.dot(w_rel, u) * u
    return float(np.linalg.norm(w_perp))


def line_of_sight_rate(
    cam_track: CameraTrack,
    t: float,
    p_target: Sequence[float],
    v_target: Sequence[float] | None = None,
) -> float:
    """Angular rate (rad/s) of the target bearing as seen in the camera frame.

    The bearing rotates in the world at ``u x v_rel / r``; subtracting the
    camera body rate and dropping the component about the bearing itself
    leaves the apparent rate of the target across the image.
    """
    pos, _, omega, cam_vel = cam_track.kinematics(t)
    r = np.asarray(p_target, float) - pos
    v_rel = (np.zeros(3) if v_target is None else np.asarray(v_target, float)) - cam_vel
    return _los_rate(r, v_rel, omega)


def body_rate(cam_track: CameraTrack, t: float) -> float:
    return float(np.linalg.norm(cam_track.kinematics(t)[2]))


def detection_probability(nm: NoiseModel, distance: float, ang_rate: float, visible: bool) -> float:
    if not visible:
        return 0.0
    p = nm.detect_intercept + nm.detect_per_distance * distance + nm.detect_per_angvel * ang_rate
    return min(max(p, 0.0), 1.0)


def _raw_std(nm: NoiseModel, distance: float, ang_rate: float) -> float:
    return nm.std_intercept + nm.std_per_distance * distance + nm.std_per_angvel * ang_rate


def noise_std(nm: NoiseModel, distance: float, ang_rate: float) -> float:
    """Std reported with a measurement; floored so the filter stays well conditioned."""
    return max(_raw_std(nm, distance, ang_rate), nm.std_floor)


def observe(
    cam_track: CameraTrack,
    true_state: ShuttleState,
    nm: NoiseModel,
    rng: np.random.Generator,
    ang_rate_source: str = "los",
) -> Measurement | None:
    """Simulated detection of the shuttle in one camera frame.

    Every call consumes the same number of variates (one detection uniform,
    three normals, one latency uniform) whether or not the shuttle is seen,
    so two camera scripts fed the same seed share their random numbers.
    """
    u_detect = rng.random()
    z = rng.standard_normal(3)
    u_latency = rng.random()

    t = true_state.t
    pos, rot, omega, cam_vel = cam_track.kinematics(t)
    cam = cam_track.camera
    r = true_state.p - pos
    if not _in_fov_camera_frame(rot @ r, cam.h_fov, cam.v_fov):
        return None
    distance = math.hypot(*r)
    if ang_rate_source == "los":
        w = _los_rate(r, true_state.v - cam_vel, omega)
    elif ang_rate_source == "body":
        w = float(np.linalg.norm(omega))
    else:
        raise ValueError(f"unknown ang_rate_source {ang_rate_source!r}")
    if u_detect >= detection_probability(nm, distance, w, True):
        return None
    # the floor applies to the reported std only, so a zero-std model is exact
    noise = max(_raw_std(nm, distance, w), 0.0) * z
    if nm.range_std_ratio != 1.0:
        b = r / distance
        noise = noise + (nm.range_std_ratio - 1.0) * (b @ noise) * b
    lo, hi = cam.latency_range
    latency = lo + (hi - lo) * u_latency
    return Measurement(t, t + latency, true_state.p + noise, noise_std(nm, distance, w))


def hsv_gate(h: int, s: int, v: int) -> bool:
    """OpenCV-convention HSV threshold for the orange shuttle."""
    if not (0 <= h <= 179 and 0 <= s <= 255 and 0 <= v <= 255):
        raise ValueError(f"HSV value out of range: ({h}, {s}, {v})")
    return (h < 5 or h > 176) and s > 60 and v > 160


# --- regression --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NoiseFit:
    model: NoiseModel
    detect_coef: np.ndarray
    detect_se: np.ndarray
    std_coef: np.ndarray
    std_se: np.ndarray
    n_detect: int
    n_error: int


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients and heteroscedasticity-robust (HC1) standard errors."""
    n, k = X.shape
    if n < k or np.linalg.matrix_rank(X) < k:
        raise NoiseFitError(f"design matrix is rank deficient ({n} samples)")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    xtx_inv = np.linalg.inv(X.T @ X)
    if n > k:
        meat = (X * resid[:, None] ** 2).T @ X
        cov = xtx_inv @ meat @ xtx_inv * n / (n - k)
        se = np.sqrt(np.diag(cov))
    else:
        se = np.zeros(k)
    return coef, se


def fit_noise_model_detailed(samples: Iterable[Sequence], std_floor: float = STD_FLOOR) -> NoiseFit:
    """Fit both linear models from ``(distance, ang_rate, detected, error_norm)`` rows.

    Detection is a linear probability model on the 0/1 indicator (or a
    per-bin detection rate in [0, 1]) over all rows; the std model regresses
    ``error_norm`` over rows that carry one.
    """
    rows = list(samples)
    if not rows:
        raise NoiseFitError("no samples")
    d = np.array([float(r[0]) for r in rows])
    w = np.array([float(r[1]) for r in rows])
    det = np.array([float(r[2]) for r in rows])
    if np.any((det < 0) | (det > 1)) or not np.all(np.isfinite(det)):
        raise NoiseFitError("detected values must be booleans or rates in [0, 1]")
    err = np.array([np.nan if (len(r) < 4 or r[3] is None) else float(r[3]) for r in rows])
    X = np.column_stack([np.ones_like(d), d, w])
    dc, dse = _ols(X, det)
    has_err = np.isfinite(err)
    sc, sse = _ols(X[has_err], err[has_err])
    model = NoiseModel(*dc.tolist(), *sc.tolist(), std_floor=std_floor)
    return NoiseFit(model, dc, dse, sc, sse, len(rows), int(has_err.sum()))


def fit_noise_model(samples: Iterable[Sequence], std_floor: float = STD_FLOOR) -> NoiseModel:
    return fit_noise_model_detailed(samples, std_floor).model


def _parse_detected(text: str) -> float:
    t = text.strip().lower()
    if t in ("true", "yes"):
        return 1.0
    if t in ("false", "no"):
        return 0.0
    return float(t)


def read_fit_csv(path: str | Path) -> list[tuple[float, float, float, float | None]]:
    """Rows of a ``distance,ang_rate,detected,error_norm`` CSV.

    ``detected`` is a boolean (``1``/``0``/``true``/``false``) or a detection rate.
    """
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"distance", "ang_rate", "detected", "error_norm"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"fit CSV missing columns: {sorted(missing)}")
        for r in reader:
            flag = _parse_detected(r["detected"])
            e = r["error_norm"].strip()
            out.append((float(r["distance"]), float(r["ang_rate"]), flag, float(e) if e else None))
    return out


def write_fit_csv(path: str | Path, rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["distance", "ang_rate", "detected", "error_norm"])
        for d, a, flag, e in rows:
            det = int(flag) if isinstance(flag, bool) else repr(float(flag))
            w.writerow([repr(float(d)), repr(float(a)), det, "" if e is None else repr(float(e))])
