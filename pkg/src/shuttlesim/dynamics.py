"""Shuttlecock flight model with quadratic aerodynamic drag.

The shuttle obeys ``dv/dt = g - |v| v / L`` where ``L`` is the aerodynamic
length.  Integration is classical RK4.  The scalar hot path works on plain
floats because numpy overhead dominates for 3-vectors; batch helpers use
numpy for many trajectories at once.

World frame: x toward the opponent, y to the left, z up, origin at the centre
of the robot's half court (where the robot stands).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

GRAVITY = (0.0, 0.0, -9.81)
DEFAULT_DT = 1.0 / 600.0
DEFAULT_AERO_LENGTH = 4.1
DEFAULT_Z_BELOW = -0.1
SPACING_TOL = 1e-9


class SimulationError(RuntimeError):
    """Integration did not reach its stop condition."""


class QualificationError(ValueError):
    """A trajectory lacks the height crossing an operation needs."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ShuttleParams:
    mass: float = 0.005
    aero_length: float = DEFAULT_AERO_LENGTH
    gravity: tuple[float, float, float] = GRAVITY

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")
        if not self.aero_length > 0:
            raise ValueError(f"aero_length must be > 0, got {self.aero_length}")
        g = tuple(float(x) for x in self.gravity)
        if len(g) != 3 or not all(math.isfinite(x) for x in g):
            raise ValueError(f"gravity must be a finite 3-vector, got {self.gravity}")
        object.__setattr__(self, "gravity", g)

    @property
    def inv_length(self) -> float:
        # L = inf switches drag off
        return 0.0 if math.isinf(self.aero_length) else 1.0 / self.aero_length

    @property
    def terminal_speed(self) -> float:
        return math.sqrt(math.hypot(*self.gravity) * self.aero_length)


@dataclass(frozen=True, eq=False)
class ShuttleState:
    t: float
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "p", _frozen(self.p))
        object.__setattr__(self, "v", _frozen(self.v))
        if self.p.shape != (3,) or self.v.shape != (3,):
            raise ValueError("p and v must be 3-vectors")
        if not (math.isfinite(self.t) and np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.v))):
            raise ValueError("shuttle state must be finite")

    def __eq__(self, other):
        if not isinstance(other, ShuttleState):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.p, other.p) and np.array_equal(self.v, other.v)

    def as_tuple(self) -> tuple[float, ...]:
        return (*self.p.tolist(), *self.v.tolist())

    @classmethod
    def from_tuple(cls, t: float, x: Sequence[float]) -> "ShuttleState":
        return cls(t, x[:3], x[3:6])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled flight record.

    Stored column-wise (``t``, ``p``, ``v`` arrays); ``states`` materialises
    :class:`ShuttleState` objects on demand.
    """

    step: float
    t: np.ndarray
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        t = _frozen(self.t)
        p = _frozen(self.p).reshape(-1, 3)
        v = _frozen(self.v).reshape(-1, 3)
        if not (len(t) == len(p) == len(v)) or len(t) == 0:
            raise ValueError("trajectory arrays must be non-empty and equally long")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if len(t) > 1:
            d = np.diff(t)
            if np.any(d <= 0):
                raise ValueError("trajectory timestamps must be strictly increasing")
            if np.max(np.abs(d - self.step)) > SPACING_TOL:
                raise ValueError("trajectory spacing deviates from step")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> ShuttleState:
        return ShuttleState(self.t[i], self.p[i], self.v[i])

    def __iter__(self) -> Iterator[ShuttleState]:
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.step == other.step
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.v, other.v)
        )

    @property
    def states(self) -> tuple[ShuttleState, ...]:
        return tuple(self)

    @classmethod
    def from_states(cls, states: Sequence[ShuttleState], step: float) -> "Trajectory":
        return cls(
            step,
            [s.t for s in states],
            [s.p for s in states],
            [s.v for s in states],
        )

    def shifted(self, dt: float) -> "Trajectory":
        return Trajectory(self.step, self.t + dt, self.p, self.v)

    def translated(self, offset: Sequence[float]) -> "Trajectory":
        return Trajectory(self.step, self.t, self.p + np.asarray(offset, float), self.v)

    def state_at(self, t: float) -> ShuttleState:
        """State at ``t`` by cubic Hermite interpolation between samples."""
        if t < self.t[0] - SPACING_TOL or t > self.t[-1] + SPACING_TOL:
            raise ValueError(f"t={t} outside trajectory span [{self.t[0]}, {self.t[-1]}]")
        k = int(np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self) - 1))
        if abs(self.t[k] - t) <= SPACING_TOL or k == len(self) - 1:
            return self[k]
        s = (t - self.t[k]) / self.step
        p, v = _hermite(self.p[k], self.v[k], self.p[k + 1], self.v[k + 1], self.step, s)
        return ShuttleState(t, p, v)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "px", "py", "pz", "vx", "vy", "vz"])
            for i in range(len(self)):
                row = [self.t[i], *self.p[i], *self.v[i]]
                w.writerow([f"{x:.9g}" for x in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"t", "px", "py", "pz", "vx", "vy", "vz"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"trajectory CSV missing columns: {sorted(missing)}")
            rows = [[float(r[k]) for k in ("t", "px", "py", "pz", "vx", "vy", "vz")] for r in reader]
        if not rows:
            raise ValueError("trajectory CSV has no rows")
        a = np.array(rows)
        t = a[:, 0]
        if len(t) == 1:
            return cls(DEFAULT_DT, t, a[:, 1:4], a[:, 4:7])
        # 9 significant digits cannot hold a 1e-9 grid; rebuild it from the endpoints
        step = (t[-1] - t[0]) / (len(t) - 1)
        grid = t[0] + step * np.arange(len(t))
        if np.max(np.abs(grid - t)) > 1e-6:
            raise ValueError("trajectory CSV timestamps are not uniformly spaced")
        return cls(step, grid, a[:, 1:4], a[:, 4:7])


def _hermite(p0, v0, p1, v1, h, s):
    """Cubic Hermite position/velocity at fraction ``s`` of a step of length ``h``."""
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    p = h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1
    dh00 = (6 * s2 - 6 * s) / h
    dh10 = 3 * s2 - 4 * s + 1
    dh01 = (-6 * s2 + 6 * s) / h
    dh11 = 3 * s2 - 2 * s
    v = dh00 * p0 + dh10 * v0 + dh01 * p1 + dh11 * v1
    return p, v


@dataclass(frozen=True)
class LaunchDistribution:
    """Independent uniform ranges for each launch component (SI units)."""

    px: tuple[float, float] = (6.0, 7.0)
    py: tuple[float, float] = (-2.0, 2.0)
    pz: tuple[float, float] = (-0.5, 2.5)
    vx: tuple[float, float] = (-19.0, -13.0)
    vy: tuple[float, float] = (-3.0, 3.0)
    vz: tuple[float, float] = (9.0, 15.0)

    def __post_init__(self):
        for name in ("px", "py", "pz", "vx", "vy", "vz"):
            lo, hi = (float(x) for x in getattr(self, name))
            if not lo <= hi:
                raise ValueError(f"launch range {name}: lo {lo} > hi {hi}")
            object.__setattr__(self, name, (lo, hi))

    @property
    def bounds(self) -> np.ndarray:
        return np.array([self.px, self.py, self.pz, self.vx, self.vy, self.vz])

    def mean(self, t: float = 0.0) -> ShuttleState:
        return ShuttleState.from_tuple(t, self.bounds.mean(axis=1))


# --- scalar kernel -----------------------------------------------------------


def _step(x, g, inv_l, h):
    """One RK4 step of the (p, v) ODE on a 6-tuple of floats."""
    px, py, pz, vx, vy, vz = x
    gx, gy, gz = g
    s = math.sqrt(vx * vx + vy * vy + vz * vz) * inv_l
    a1x, a1y, a1z = gx - s * vx, gy - s * vy, gz - s * vz
    hh = 0.5 * h
    v2x, v2y, v2z = vx + hh * a1x, vy + hh * a1y, vz + hh * a1z
    s = math.sqrt(v2x * v2x + v2y * v2y + v2z * v2z) * inv_l
    a2x, a2y, a2z = gx - s * v2x, gy - s * v2y, gz - s * v2z
    v3x, v3y, v3z = vx + hh * a2x, vy + hh * a2y, vz + hh * a2z
    s = math.sqrt(v3x * v3x + v3y * v3y + v3z * v3z) * inv_l
    a3x, a3y, a3z = gx - s * v3x, gy - s * v3y, gz - s * v3z
    v4x, v4y, v4z = vx + h * a3x, vy + h * a3y, vz + h * a3z
    s = math.sqrt(v4x * v4x + v4y * v4y + v4z * v4z) * inv_l
    a4x, a4y, a4z = gx - s * v4x, gy - s * v4y, gz - s * v4z
    h6 = h / 6.0
    return (
        px + h6 * (vx + 2 * v2x + 2 * v3x + v4x),
        py + h6 * (vy + 2 * v2y + 2 * v3y + v4y),
        pz + h6 * (vz + 2 * v2z + 2 * v3z + v4z),
        vx + h6 * (a1x + 2 * a2x + 2 * a3x + a4x),
        vy + h6 * (a1y + 2 * a2y + 2 * a3y + a4y),
        vz + h6 * (a1z + 2 * a2z + 2 * a3z + a4z),
    )


def grid_substeps(t0: float, t1: float, dt: float) -> list[float]:
    """Step lengths from t0 to t1 that land on the absolute grid ``k*dt``.

    Anchoring substeps to a global grid makes propagation path-independent:
    stopping at an intermediate grid time does not change the result.
    """
    steps = []
    t = t0
    k = math.floor(t0 / dt + 1e-9) + 1
    while k * dt < t1 - 1e-12:
        if k * dt - t > 1e-12:
            steps.append(k * dt - t)
            t = k * dt
        k += 1
    if t1 - t > 0:
        steps.append(t1 - t)
    return steps


def _propagate(x, g, inv_l, t0, t1, dt):
    for h in grid_substeps(t0, t1, dt):
        x = _step(x, g, inv_l, h)
    return x


# --- operations --------------------------------------------------------------


def acceleration(state: ShuttleState, params: ShuttleParams) -> np.ndarray:
    """``g - |v| v / L``; exactly ``g`` at rest."""
    v = state.v
    g = np.array(params.gravity)
    speed = float(np.linalg.norm(v))
    if speed == 0.0:
        return g
    return g - speed * v * params.inv_length


def drag_jacobian(v: Sequence[float], params: ShuttleParams) -> np.ndarray:
    """d(acceleration)/dv = -(|v| I + v v^T / |v|) / L; zero at rest."""
    v = np.asarray(v, float)
    speed = float(np.linalg.norm(v))
    if speed == 0.0:
        return np.zeros((3, 3))
    return -(speed * np.eye(3) + np.outer(v, v) / speed) * params.inv_length


def aero_length_from_physical(mass: float, air_density: float, cross_section: float, drag_coeff: float) -> float:
    for name, val in (("mass", mass), ("air_density", air_density), ("cross_section", cross_section), ("drag_coeff", drag_coeff)):
        if not val > 0:
            raise ValueError(f"{name} must be > 0, got {val}")
    return 2.0 * mass / (air_density * cross_section * drag_coeff)


def step_rk4(state: ShuttleState, params: ShuttleParams, dt: float) -> ShuttleState:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    x = _step(state.as_tuple(), params.gravity, params.inv_length, dt)
    return ShuttleState.from_tuple(state.t + dt, x)


def propagate(state: ShuttleState, params: ShuttleParams, t_new: float, dt: float = DEFAULT_DT) -> ShuttleState:
    """Integrate ``state`` forward to ``t_new`` on the absolute ``dt`` grid."""
    if t_new < state.t:
        raise ValueError(f"cannot propagate backwards from {state.t} to {t_new}")
    x = _propagate(state.as_tuple(), params.gravity, params.inv_length, state.t, t_new, dt)
    return ShuttleState.from_tuple(t_new, x)


def simulate(
    initial: ShuttleState,
    params: ShuttleParams,
    dt: float = DEFAULT_DT,
    *,
    max_t: float | None = None,
    z_below: float | None = None,
    max_steps: int = 200_000,
) -> Trajectory:
    """Fixed-step rollout until ``t >= max_t`` or the shuttle is below
    ``z_below`` while descending, whichever first.

    The descent condition lets launches that start below ground rise first.
    The returned trajectory's last state satisfies the stop condition.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if max_t is None and z_below is None:
        raise ValueError("simulate needs max_t or z_below")

    def done(t, z, vz):
        return (max_t is not None and t >= max_t - 1e-12) or (z_below is not None and z < z_below and vz <= 0)

    g, inv_l = params.gravity, params.inv_length
    x = initial.as_tuple()
    t0 = initial.t
    ts, xs = [t0], [x]
    k = 0
    while not done(ts[-1], x[2], x[5]):
        if k >= max_steps:
            raise SimulationError(f"stop condition not reached after {max_steps} steps")
        x = _step(x, g, inv_l, dt)
        k += 1
        ts.append(t0 + k * dt)
        xs.append(x)
    a = np.array(xs)
    return Trajectory(dt, np.array(ts), a[:, :3], a[:, 3:])


def sample_launch(dist: LaunchDistribution, rng_seed=None) -> ShuttleState:
    """Uniform draw of a launch state at t = 0; ``rng_seed`` is a seed or Generator."""
    rng = np.random.default_rng(rng_seed)
    b = dist.bounds
    return ShuttleState.from_tuple(0.0, rng.uniform(b[:, 0], b[:, 1]))


def sample_launches(dist: LaunchDistribution, n: int, rng_seed=None) -> np.ndarray:
    """``n`` launch states as an (n, 6) array."""
    rng = np.random.default_rng(rng_seed)
    b = dist.bounds
    return rng.uniform(b[:, 0], b[:, 1], size=(n, 6))


def find_crossing_in_trajectory(traj: Trajectory, height: float, descending: bool = True) -> ShuttleState | None:
    """First sampled crossing of ``height``, refined on the Hermite interpolant."""
    z = traj.p[:, 2] - height
    if descending:
        idx = np.nonzero((z[:-1] > 0) & (z[1:] <= 0))[0]
    else:
        idx = np.nonzero((z[:-1] < 0) & (z[1:] >= 0))[0]
    if len(idx) == 0:
        return None
    k = int(idx[0])
    if z[k + 1] == 0:
        return traj[k + 1]
    p0, v0, p1, v1, h = traj.p[k], traj.v[k], traj.p[k + 1], traj.v[k + 1], traj.step
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pm, _ = _hermite(p0[2], v0[2], p1[2], v1[2], h, mid)
        if (pm - height > 0) == descending:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    s = 0.5 * (lo + hi)
    p, v = _hermite(p0, v0, p1, v1, h, s)
    return ShuttleState(traj.t[k] + s * h, p, v)


def retime_to_target(
    traj: Trajectory,
    target_height_rel: float,
    swing_time: float,
    base_height: float = 0.0,
) -> Trajectory:
    """Shift ``traj`` in time so it descends through the target height at ``swing_time``.

    If the shifted record starts after t = 0 the gap is filled with copies of
    the launch state (the shuttle is launched later); samples shifted before
    t = 0 are dropped.
    """
    height = base_height + target_height_rel
    crossing = find_crossing_in_trajectory(traj, height)
    if crossing is None:
        raise QualificationError(f"trajectory never descends through z = {height}")
    shift = swing_time - crossing.t
    if abs(shift) <= SPACING_TOL:
        return traj
    t = traj.t + shift
    p, v = traj.p, traj.v
    keep = t >= -SPACING_TOL
    if not np.all(keep):
        t, p, v = t[keep], p[keep], v[keep]
    n_pad = int(math.floor(t[0] / traj.step + SPACING_TOL / traj.step))
    if n_pad > 0:
        pad_t = t[0] - traj.step * np.arange(n_pad, 0, -1)
        t = np.concatenate([pad_t, t])
        p = np.concatenate([np.repeat(p[:1], n_pad, axis=0), p])
        v = np.concatenate([np.repeat(v[:1], n_pad, axis=0), v])
    return Trajectory(traj.step, t, p, v)


# --- batch kernels -----------------------------------------------------------


def _accel_batch(v: np.ndarray, g: np.ndarray, inv_l) -> np.ndarray:
    speed = np.linalg.norm(v, axis=-1, keepdims=True)
    return g - speed * v * np.asarray(inv_l).reshape(-1, 1)


def step_rk4_batch(x: np.ndarray, params: ShuttleParams, h, inv_l=None) -> np.ndarray:
    """RK4 step of an (n, 6) state array; ``h`` may be scalar or per-row."""
    g = np.array(params.gravity)
    inv_l = params.inv_length if inv_l is None else inv_l
    h = np.asarray(h, float).reshape(-1, 1)
    p, v = x[:, :3], x[:, 3:]
    a1 = _accel_batch(v, g, inv_l)
    v2 = v + 0.5 * h * a1
    a2 = _accel_batch(v2, g, inv_l)
    v3 = v + 0.5 * h * a2
    a3 = _accel_batch(v3, g, inv_l)
    v4 = v + h * a3
    a4 = _accel_batch(v4, g, inv_l)
    p_new = p + h / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
    v_new = v + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    return np.hstack([p_new, v_new])
