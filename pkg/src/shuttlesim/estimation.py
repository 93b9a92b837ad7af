"""Time-adaptive extended Kalman filter over the shuttle state (p, v).

The mean is propagated with the same RK4 integrator used for ground truth;
the covariance with the drag Jacobian and a piecewise white-acceleration
process noise whose size grows with the elapsed prediction interval.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import DEFAULT_DT, ShuttleParams, ShuttleState, _step, grid_substeps
from .perception import Measurement

logger = logging.getLogger(__name__)

_I3 = np.eye(3)
_H = np.hstack([_I3, np.zeros((3, 3))])


class EstimationError(ValueError):
    pass


class OrderingError(EstimationError):
    """Prediction or update requested for a time before the filter's."""


class InvalidMeasurement(EstimationError):
    pass


@dataclass(frozen=True)
class EkfConfig:
    process_noise_std: float = 2e-3
    measurement_noise_std: float = 4e-2
    reset_gap: float = 0.2
    init_pos_std: float = 4e-2
    init_vel_std: float = 10.0
    substep: float = DEFAULT_DT
    use_measurement_std: bool = True

    def __post_init__(self):
        for name in ("process_noise_std", "measurement_noise_std", "init_pos_std", "init_vel_std", "reset_gap", "substep"):
            if not getattr(self, name) > 0:
                raise ValueError(f"EkfConfig.{name} must be > 0")


def _ro(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class EkfState:
    t: float = 0.0
    mean: np.ndarray = field(default_factory=lambda: np.zeros(6))
    cov: np.ndarray = field(default_factory=lambda: np.eye(6))
    initialized: bool = False
    t_last_meas: float = -math.inf
    n_updates: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mean", _ro(self.mean))
        object.__setattr__(self, "cov", _ro(self.cov))
        if self.mean.shape != (6,) or self.cov.shape != (6, 6):
            raise ValueError("EKF mean must be (6,) and cov (6, 6)")

    @property
    def position(self) -> np.ndarray:
        return self.mean[:3]

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[3:]

    def as_shuttle_state(self) -> ShuttleState:
        return ShuttleState(self.t, self.mean[:3], self.mean[3:])

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "t_last_meas": self.t_last_meas if math.isfinite(self.t_last_meas) else None,
            "mean": self.mean.tolist(),
            "cov": self.cov.reshape(-1).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EkfState":
        t_last = d.get("t_last_meas")
        return cls(
            t=d["t"],
            mean=d["mean"],
            cov=np.reshape(d["cov"], (6, 6)),
            initialized=True,
            t_last_meas=-math.inf if t_last is None else t_last,
        )


def _phi_blocks(J: np.ndarray, h) -> tuple[np.ndarray, np.ndarray]:
    """Blocks of exp(F h) for F = [[0, I], [0, J]]: returns (top-right, bottom-right).

    ``J`` may be a single 3x3 matrix or an (n, 3, 3) stack with ``h`` of shape (n,).
    """
    h = np.asarray(h, float)[..., None, None]
    Jh = J * h
    Jh2 = Jh @ Jh
    bottom = _I3 + Jh + Jh2 / 2.0 + Jh2 @ Jh / 6.0
    top = h * (_I3 + Jh / 2.0 + Jh2 / 6.0)
    return top, bottom


def _drag_jacobians(v: np.ndarray, inv_l: float) -> np.ndarray:
    speed = np.linalg.norm(v, axis=1)
    safe = np.where(speed > 0, speed, 1.0)
    J = speed[:, None, None] * _I3 + v[:, :, None] * v[:, None, :] / safe[:, None, None]
    return -J * inv_l


def _transitions(X: np.ndarray, hs: np.ndarray, params: ShuttleParams) -> np.ndarray:
    """Per-substep 6x6 transition matrices along the sampled states ``X`` (n+1, 6).

    Each substep is linearised about its midpoint velocity.
    """
    v_mid = 0.5 * (X[:-1, 3:] + X[1:, 3:])
    top, bottom = _phi_blocks(_drag_jacobians(v_mid, params.inv_length), hs)
    Phi = np.zeros((len(hs), 6, 6))
    Phi[:, :3, :3] = _I3
    Phi[:, :3, 3:] = top
    Phi[:, 3:, 3:] = bottom
    return Phi


def _rollout(x, params: ShuttleParams, t0: float, t1: float, dt: float):
    g, inv_l = params.gravity, params.inv_length
    hs = grid_substeps(t0, t1, dt)
    xs = [x]
    for h in hs:
        x = _step(x, g, inv_l, h)
        xs.append(x)
    return np.array(xs), np.array(hs)


def _substep_transition(x, x_next, params: ShuttleParams, h: float) -> np.ndarray:
    return _transitions(np.array([x, x_next], float), np.array([h]), params)[0]


def transition_matrix(state: ShuttleState, params: ShuttleParams, t_new: float, dt: float = DEFAULT_DT):
    """Propagate ``state`` to ``t_new`` with its 6x6 state-transition matrix.

    Returns ``(final 6-tuple, Phi)``.
    """
    X, hs = _rollout(state.as_tuple(), params, state.t, t_new, dt)
    Phi = np.eye(6)
    for F in _transitions(X, hs, params) if len(hs) else ():
        Phi = F @ Phi
    return tuple(X[-1].tolist()), Phi


def _process_noise(q: float, h) -> np.ndarray:
    h = np.asarray(h, float)[..., None, None]
    Q = np.empty(h.shape[:-2] + (6, 6))
    Q[..., :3, :3] = q * h**3 / 3.0 * _I3
    Q[..., :3, 3:] = q * h**2 / 2.0 * _I3
    Q[..., 3:, :3] = q * h**2 / 2.0 * _I3
    Q[..., 3:, 3:] = q * h * _I3
    return Q


def ekf_predict(ekf: EkfState, params: ShuttleParams, t_new: float, cfg: EkfConfig) -> EkfState:
    if not ekf.initialized:
        raise EstimationError("cannot predict an uninitialised filter")
    if t_new < ekf.t - 1e-12:
        raise OrderingError(f"predict to {t_new} before filter time {ekf.t}")
    if t_new <= ekf.t:
        return ekf
    X, hs = _rollout(tuple(ekf.mean.tolist()), params, ekf.t, t_new, cfg.substep)
    Phis = _transitions(X, hs, params)
    Qs = _process_noise(cfg.process_noise_std**2, hs)
    P = ekf.cov.copy()
    for Phi, Q in zip(Phis, Qs):
        P = Phi @ P @ Phi.T + Q
    P = 0.5 * (P + P.T)
    return replace(ekf, t=t_new, mean=X[-1], cov=P)


def ekf_update(ekf: EkfState, meas: Measurement, cfg: EkfConfig) -> EkfState:
    """Position update with Joseph-form covariance."""
    z = np.asarray(meas.p_meas, float)
    if z.shape != (3,) or not np.all(np.isfinite(z)):
        raise InvalidMeasurement(f"non-finite measurement at t={meas.t_capture}")
    if abs(meas.t_capture - ekf.t) > 1e-9:
        raise OrderingError(f"filter at t={ekf.t} but measurement captured at {meas.t_capture}")
    std = meas.std if (cfg.use_measurement_std and meas.std is not None) else cfg.measurement_noise_std
    R = std * std * _I3
    P = ekf.cov
    S = P[:3, :3] + R
    K = np.linalg.solve(S, P[:3, :]).T
    mean = ekf.mean + K @ (z - ekf.mean[:3])
    A = np.eye(6) - K @ _H
    P = A @ P @ A.T + K @ R @ K.T
    P = 0.5 * (P + P.T)
    return replace(ekf, mean=mean, cov=P, t_last_meas=meas.t_capture, n_updates=ekf.n_updates + 1)


def ekf_initialize(meas: Measurement, cfg: EkfConfig) -> EkfState:
    """Filter centred on ``meas`` with zero velocity and diagonal init covariance."""
    z = np.asarray(meas.p_meas, float)
    if not np.all(np.isfinite(z)):
        raise InvalidMeasurement(f"non-finite measurement at t={meas.t_capture}")
    pos_std = cfg.init_pos_std
    if cfg.use_measurement_std and meas.std is not None:
        pos_std = meas.std
    cov = np.diag([pos_std**2] * 3 + [cfg.init_vel_std**2] * 3)
    return EkfState(
        t=meas.t_capture,
        mean=np.concatenate([z, np.zeros(3)]),
        cov=cov,
        initialized=True,
        t_last_meas=meas.t_capture,
        n_updates=1,
    )


def ekf_ingest(ekf: EkfState, meas: Measurement, params: ShuttleParams, cfg: EkfConfig) -> EkfState:
    """Feed one measurement: (re)initialise after a gap, otherwise predict and update.

    Invalid or out-of-order measurements are logged and leave the state unchanged.
    """
    if not np.all(np.isfinite(meas.p_meas)):
        logger.warning("rejected non-finite measurement at t=%s", meas.t_capture)
        return ekf
    if not ekf.initialized or meas.t_capture - ekf.t_last_meas > cfg.reset_gap:
        return ekf_initialize(meas, cfg)
    if meas.t_capture < ekf.t - 1e-12:
        logger.debug("dropped stale measurement captured at %s (filter at %s)", meas.t_capture, ekf.t)
        return ekf
    return ekf_update(ekf_predict(ekf, params, meas.t_capture, cfg), meas, cfg)


def nees(ekf: EkfState, x_true) -> float:
    """Normalised estimation error squared of the full 6-state."""
    e = np.asarray(x_true, float) - ekf.mean
    return float(e @ np.linalg.solve(ekf.cov, e))
