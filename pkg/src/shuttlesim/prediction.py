"""Interception prediction, trajectory qualification, and target persistence."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    DEFAULT_DT,
    ShuttleParams,
    ShuttleState,
    Trajectory,
    _hermite,
    _step,
    find_crossing_in_trajectory,
    step_rk4_batch,
)
from .estimation import EkfState, transition_matrix

DEFAULT_SWING_HEIGHT = 1.25
ROLLOUT_HORIZON = 3.0
TARGET_HOLD = 2.0
CROSSING_TOL = 1e-6


class NotInterceptable(ValueError):
    """The predicted flight never descends through the requested height."""


@dataclass(frozen=True)
class CourtGeometry:
    """Service area on the robot's side, in the world frame.

    Defaults: short service line 1.98 m and back boundary 6.7 m from the net,
    singles sidelines at +-2.59 m, with the net at x = +3.35 m.
    """

    x_min: float = -3.35
    x_max: float = 1.37
    y_min: float = -2.59
    y_max: float = 2.59
    net_height: float = 1.55
    qualification_height: float = 1.55
    ground_height: float = 0.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("service area rectangle is degenerate")
        if not (self.net_height > 0 and self.qualification_height > 0):
            raise ValueError("court heights must be > 0")

    def contains(self, x: float, y: float) -> bool:
        return bool(self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max)


@dataclass(frozen=True, eq=False)
class InterceptionTarget:
    p: np.ndarray
    t_swing: float
    created_at: float
    source: str = "full_rollout"

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        p.flags.writeable = False
        object.__setattr__(self, "p", p)
        if not self.t_swing > self.created_at:
            raise ValueError("swing time must be after the target's creation time")
        if self.source not in ("full_rollout", "linearized"):
            raise ValueError(f"unknown target source {self.source!r}")

    def to_dict(self) -> dict:
        return {"t_created": self.created_at, "t_swing": self.t_swing, "p": self.p.tolist(), "source": self.source}


def _bisect_crossing(x, g, inv_l, h, height, tol=CROSSING_TOL):
    """Refine a descending crossing inside one RK4 step of length ``h`` from ``x``."""
    lo, hi = 0.0, h
    xm, tau = x, 0.0
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        xm = _step(x, g, inv_l, tau)
        dz = xm[2] - height
        if abs(dz) < tol:
            break
        if dz > 0:
            lo = tau
        else:
            hi = tau
    return tau, xm


def _hermite_crossing_xy(x, x_next, h, height):
    """Horizontal position where the cubic Hermite interpolant of one step
    descends through ``height``."""
    # z(s) - height as a cubic in s, evaluated by Horner's rule
    z0, z1, m0, m1 = x[2] - height, x_next[2] - height, h * x[5], h * x_next[5]
    a = 2 * z0 + m0 - 2 * z1 + m1
    b = -3 * z0 - 2 * m0 + 3 * z1 - m1
    lo, hi = 0.0, 1.0
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if ((a * mid + b) * mid + m0) * mid + z0 > 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    px, _ = _hermite(x[0], x[3], x_next[0], x_next[3], h, s)
    py, _ = _hermite(x[1], x[4], x_next[1], x_next[4], h, s)
    return px, py


def find_height_crossing(
    start: ShuttleState,
    params: ShuttleParams,
    height: float,
    *,
    dt: float = DEFAULT_DT,
    horizon: float = ROLLOUT_HORIZON,
    ground: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """First descending crossing of ``height`` after ``start.t``.

    Returns ``(t, p, v)``.  The crossing is bracketed on a fixed-step RK4
    rollout and refined by bisection on the step length until
    ``|z - height| < 1e-6``.  Raises :class:`NotInterceptable` if the shuttle
    reaches the ground (or the horizon) first.
    """
    g, inv_l = params.gravity, params.inv_length
    x = start.as_tuple()
    n_steps = int(math.ceil(horizon / dt))
    for k in range(n_steps):
        x_next = _step(x, g, inv_l, dt)
        if x[2] > height >= x_next[2]:
            tau, xc = _bisect_crossing(x, g, inv_l, dt, height)
            if xc[5] < 0:
                return start.t + k * dt + tau, np.array(xc[:3]), np.array(xc[3:])
        if height >= ground and x_next[2] < ground and x_next[5] < 0:
            raise NotInterceptable(f"shuttle lands before descending through z = {height:.3f}")
        x = x_next
    raise NotInterceptable(f"no descending crossing of z = {height:.3f} within {horizon} s")


def find_height_crossings_batch(
    x0: np.ndarray,
    params: ShuttleParams,
    height: float,
    *,
    dt: float = DEFAULT_DT,
    horizon: float = ROLLOUT_HORIZON,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`find_height_crossing` for an (n, 6) array of states at t = 0.

    Returns crossing times (n,) and positions (n, 3); NaN where none is found.
    """
    x = np.array(x0, float)
    n = len(x)
    t_out = np.full(n, np.nan)
    p_out = np.full((n, 3), np.nan)
    active = np.ones(n, bool)
    for k in range(int(math.ceil(horizon / dt))):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        xa = x[idx]
        xn = step_rk4_batch(xa, params, dt)
        hit = (xa[:, 2] > height) & (xn[:, 2] <= height)
        if hit.any():
            hi_idx = idx[hit]
            x_lo = xa[hit]
            lo = np.zeros(len(hi_idx))
            hi = np.full(len(hi_idx), dt)
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                zm = step_rk4_batch(x_lo, params, mid)[:, 2]
                above = zm > height
                lo = np.where(above, mid, lo)
                hi = np.where(above, hi, mid)
            tau = 0.5 * (lo + hi)
            xc = step_rk4_batch(x_lo, params, tau)
            t_out[hi_idx] = k * dt + tau
            p_out[hi_idx] = xc[:, :3]
            active[hi_idx] = False
        landed = (xn[:, 2] < 0) & (xn[:, 5] < 0) & ~hit
        active[idx[landed]] = False
        x[idx] = xn
    return t_out, p_out


def predict_interception(
    ekf: EkfState,
    params: ShuttleParams,
    court: CourtGeometry,
    swing_height_rel: float = DEFAULT_SWING_HEIGHT,
    base_height: float = 0.0,
    now: float | None = None,
    *,
    dt: float = DEFAULT_DT,
    horizon: float = ROLLOUT_HORIZON,
) -> InterceptionTarget:
    """Roll the filter mean forward to its descending crossing of the swing height."""
    if not ekf.initialized:
        raise NotInterceptable("filter not initialised")
    now = ekf.t if now is None else now
    t, p, _ = find_height_crossing(
        ekf.as_shuttle_state(), params, base_height + swing_height_rel, dt=dt, horizon=horizon
    )
    if t <= now:
        raise NotInterceptable(f"predicted crossing at t={t:.3f} is not after now={now:.3f}")
    return InterceptionTarget(p, t, now, "full_rollout")


def predict_qualified_interception(
    ekf: EkfState,
    params: ShuttleParams,
    court: CourtGeometry,
    swing_height_rel: float = DEFAULT_SWING_HEIGHT,
    base_height: float = 0.0,
    now: float | None = None,
    *,
    dt: float = DEFAULT_DT,
    horizon: float = ROLLOUT_HORIZON,
) -> tuple[InterceptionTarget | None, bool]:
    """:func:`predict_interception` and the two-rectangle test on one rollout.

    Returns ``(target or None, qualified)``; the rollout runs from the filter
    mean until it descends through the ground height or the horizon ends.
    """
    if not ekf.initialized:
        return None, False
    now = ekf.t if now is None else now
    g, inv_l = params.gravity, params.inv_length
    swing = base_height + swing_height_rel
    x = tuple(ekf.mean.tolist())
    hit_swing = hit_net = None
    for k in range(int(math.ceil(horizon / dt))):
        x_next = _step(x, g, inv_l, dt)
        if x_next[5] < 0:
            if hit_swing is None and x[2] > swing >= x_next[2]:
                tau, xc = _bisect_crossing(x, g, inv_l, dt, swing)
                hit_swing = (ekf.t + k * dt + tau, xc)
            if hit_net is None and x[2] > court.qualification_height >= x_next[2]:
                hit_net = _hermite_crossing_xy(x, x_next, dt, court.qualification_height)
            if x[2] > court.ground_height >= x_next[2]:
                ground = _hermite_crossing_xy(x, x_next, dt, court.ground_height)
                break
        x = x_next
    else:
        ground = None
    target = None
    if hit_swing is not None and hit_swing[0] > now:
        target = InterceptionTarget(np.array(hit_swing[1][:3]), hit_swing[0], now, "full_rollout")
    qualified = (
        hit_net is not None
        and ground is not None
        and court.contains(hit_net[0], hit_net[1])
        and court.contains(ground[0], ground[1])
    )
    return target, qualified


def qualify_trajectory(traj: Trajectory, court: CourtGeometry) -> bool:
    """Two-rectangle test: descends through the qualification height and
    lands, both inside the service area."""
    upper = find_crossing_in_trajectory(traj, court.qualification_height)
    if upper is None or not court.contains(upper.p[0], upper.p[1]):
        return False
    ground = find_crossing_in_trajectory(traj, court.ground_height)
    if ground is None:
        return False
    return court.contains(ground.p[0], ground.p[1])


def linearized_interception(est_p, est_v, true_p, true_v, T: float, t_k: float, params: ShuttleParams, p_T) -> np.ndarray:
    """First-order interception estimate from the state estimation error at ``t_k``.

    ``p_T + (p_est - p) + (1 - 2 dt / L) (v_est - v) (T - t_k)`` with
    ``dt = T - t_k``; ``p_T`` is the true crossing position.
    """
    if T < t_k:
        raise ValueError("swing time must not precede the current time")
    dt = T - t_k
    dp = np.asarray(est_p, float) - np.asarray(true_p, float)
    dv = np.asarray(est_v, float) - np.asarray(true_v, float)
    return np.asarray(p_T, float) + dp + (1.0 - 2.0 * dt * params.inv_length) * dv * dt


def linearized_interception_variational(
    est_p, est_v, true_state: ShuttleState, params: ShuttleParams, height: float, *, dt: float = DEFAULT_DT
) -> np.ndarray:
    """Exact first-order interception estimate.

    Maps the estimation error through the state-transition matrix of the
    true flight from ``true_state.t`` to its crossing time ``T``, then slides
    along the true velocity so the result lies on the crossing plane.
    """
    T, p_T, v_T = find_height_crossing(true_state, params, height, dt=dt)
    _, Phi = transition_matrix(true_state, params, T, dt)
    d0 = np.concatenate([np.asarray(est_p, float) - true_state.p, np.asarray(est_v, float) - true_state.v])
    dx = Phi @ d0
    dT = -dx[2] / v_T[2]
    return p_T + dx[:3] + v_T * dT


def target_persistence(
    last: InterceptionTarget | None,
    now: float,
    fresh: InterceptionTarget | None,
    hold: float = TARGET_HOLD,
) -> InterceptionTarget | None:
    if fresh is not None:
        return fresh
    if last is not None and now - last.created_at <= hold:
        return last
    return None
