"""Evaluation metrics: swing tracking rewards, perception error, mechanical
power, arm current, and hit success."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SUCCESS_RADIUS = 0.1
CURRENT_LIMIT = 8.0

# scales of the task reward terms; recorded for reference, nothing trains on them
REWARD_SCALES = {
    "ee_position": 6400.0,
    "ee_orientation": 1200.0,
    "ee_swing_velocity": 1200.0,
    "perception_error": 3.0,
}


@dataclass(frozen=True)
class RewardParams:
    sigma_p: float = 0.1
    sigma_v: float = 1.0

    def __post_init__(self):
        if not (self.sigma_p > 0 and self.sigma_v > 0):
            raise ValueError("reward sensitivities must be > 0")


@dataclass(frozen=True, eq=False)
class SwingEvaluation:
    p_ee: np.ndarray
    p_target: np.ndarray
    v_ee: float
    v_target: float
    n_ee: np.ndarray
    n_target: np.ndarray
    at_swing_time: bool = True

    def __post_init__(self):
        for name in ("p_ee", "p_target", "n_ee", "n_target"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        for name in ("n_ee", "n_target"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a unit vector")


@dataclass(frozen=True, eq=False)
class JointSeries:
    """Per-joint torque (N m) and velocity (rad/s) sampled at ``times``.

    ``torque`` and ``velocity`` are (n_samples, n_joints) arrays.
    """

    times: np.ndarray
    torque: np.ndarray
    velocity: np.ndarray
    motor_constant: np.ndarray
    bus_voltage: float

    def __post_init__(self):
        t = np.asarray(self.times, float).reshape(-1)
        tau = np.asarray(self.torque, float).reshape(len(t), -1)
        w = np.asarray(self.velocity, float).reshape(len(t), -1)
        if tau.shape != w.shape:
            raise ValueError("torque and velocity series must have equal shapes")
        km = np.broadcast_to(np.asarray(self.motor_constant, float), (tau.shape[1],)).copy()
        if not self.bus_voltage > 0:
            raise ValueError("bus voltage must be > 0")
        if np.any(km <= 0):
            raise ValueError("motor constants must be > 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "torque", tau)
        object.__setattr__(self, "velocity", w)
        object.__setattr__(self, "motor_constant", km)


@dataclass(frozen=True)
class CurrentCheck:
    ok: bool
    index: int | None = None
    t: float | None = None
    current: float | None = None


def reward_position(ev: SwingEvaluation, rp: RewardParams) -> float:
    if not ev.at_swing_time:
        return 0.0
    return 1.0 / (1.0 + float(np.linalg.norm(ev.p_target - ev.p_ee)) / rp.sigma_p)


def cosine_distance(a, b) -> float:
    return 1.0 - float(np.dot(a, b))


def reward_orientation(ev: SwingEvaluation) -> float:
    if not ev.at_swing_time:
        return 0.0
    return 1.0 / (1.0 + cosine_distance(ev.n_target, ev.n_ee) ** 2)


def reward_velocity(ev: SwingEvaluation, rp: RewardParams) -> float:
    if not ev.at_swing_time:
        return 0.0
    return 1.0 / (1.0 + (ev.v_target - ev.v_ee) ** 2 / rp.sigma_v)


def reward_perception(p_est_intercept, p_true_intercept) -> float:
    err = np.asarray(p_est_intercept, float) - np.asarray(p_true_intercept, float)
    return 1.0 / (1.0 + float(np.linalg.norm(err)))


def perception_error(p_true_at_swing, p_est_at_swing) -> float:
    return float(np.linalg.norm(np.asarray(p_true_at_swing, float) - np.asarray(p_est_at_swing, float)))


def path_length(positions) -> float:
    """Polyline length of an end-effector path, the alternative power normaliser."""
    p = np.asarray(positions, float)
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def normalized_mechanical_power(js: JointSeries, target_distance: float, discrete_sum: bool = False) -> float:
    """Positive joint power summed over joints, integrated over time, per metre.

    With ``discrete_sum`` the per-sample powers are summed without time weighting.
    """
    if not target_distance > 0:
        raise ValueError("target distance must be > 0")
    power = np.clip(js.torque * js.velocity, 0.0, None).sum(axis=1)
    if discrete_sum:
        total = float(power.sum())
    else:
        total = float(np.trapezoid(power, js.times)) if len(power) > 1 else 0.0
    return total / target_distance


def total_current(js: JointSeries, index: int) -> float:
    """Arm bus current at one sample: resistive plus mechanical power over voltage."""
    tau = js.torque[index]
    w = js.velocity[index]
    resistive = np.sum((tau / js.motor_constant) ** 2)
    mechanical = np.sum(tau * w)
    return float((resistive + mechanical) / js.bus_voltage)


def check_current_constraint(js: JointSeries, limit: float = CURRENT_LIMIT) -> CurrentCheck:
    """First sample where ``|I| < limit`` fails."""
    for i in range(len(js.times)):
        current = total_current(js, i)
        if not abs(current) < limit:
            return CurrentCheck(False, i, float(js.times[i]), current)
    return CurrentCheck(True)


def hit_success(
    p_ee: Sequence[float],
    p_target: Sequence[float],
    perception_err: float = 0.0,
    level: str = "I",
    rule: str = "sum",
    radius: float = SUCCESS_RADIUS,
) -> bool:
    """Level I: racket within ``radius`` of the target.  Level II also charges
    the perception error, either added to the position error (``rule='sum'``)
    or required to be within ``radius`` on its own (``rule='both'``)."""
    pos_err = float(np.linalg.norm(np.asarray(p_ee, float) - np.asarray(p_target, float)))
    if level == "I":
        return pos_err <= radius
    if level != "II":
        raise ValueError(f"unknown success level {level!r}")
    if rule == "sum":
        return pos_err + perception_err <= radius
    if rule == "both":
        return pos_err <= radius and perception_err <= radius
    raise ValueError(f"unknown level II rule {rule!r}")
