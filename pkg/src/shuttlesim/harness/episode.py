"""One closed-loop episode: truth flight, scripted camera, delayed detections,
EKF tracking, interception targets, and the perception error at swing time."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from ..dynamics import ShuttleParams, ShuttleState, find_crossing_in_trajectory, simulate
from ..estimation import EkfState, ekf_ingest, ekf_predict, nees
from ..metrics import perception_error
from ..perception import Measurement, observe
from ..prediction import (
    NotInterceptable,
    find_height_crossing,
    predict_qualified_interception,
    qualify_trajectory,
    target_persistence,
)
from .camera import build_camera_track
from .config import SCHEMA_VERSION, ScenarioConfig

MAX_LAUNCH_DRAWS = 100


def _f(x) -> float | None:
    return None if x is None else float(x)


def _vec(a) -> list[float] | None:
    return None if a is None else [float(v) for v in a]


@dataclass(frozen=True)
class EpisodeRecord:
    index: int
    camera_script: str
    launch: dict
    aero_length: float
    swing_height: float
    true_crossing: dict | None
    landing: list[float] | None
    true_qualified: bool
    epsilon: float | None
    nees: float | None
    estimate_at_swing: list[float] | None
    qualified: bool
    registration_delay: float | None
    n_frames: int
    n_measurements: int
    n_resets: int
    cell: list[float] | None = None
    measurements: list[dict] = field(default_factory=list)
    ekf_log: list[dict] = field(default_factory=list)
    targets: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        d = {"schema_version": SCHEMA_VERSION}
        for name in self.__dataclass_fields__:
            d[name] = getattr(self, name)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        return cls(**{k: v for k, v in d.items() if k != "schema_version"})


def _deliver(measurements: list[Measurement]) -> list[Measurement]:
    """Order detections for the filter: a FIFO pipeline never releases a frame
    before an earlier one, so availability times are made non-decreasing."""
    out, latest = [], -math.inf
    for m in measurements:
        if m.t_available < latest:
            m = replace(m, t_available=latest)
        latest = m.t_available
        out.append(m)
    return out


def _true_crossing(truth, params: ShuttleParams, height: float):
    """Descending crossing of ``height`` on the truth record, refined exactly as
    :func:`find_height_crossing` would from the launch state."""
    z = truth.p[:, 2]
    for k in np.nonzero((z[:-1] > height) & (z[1:] <= height))[0]:
        try:
            return find_height_crossing(truth[int(k)], params, height, dt=truth.step, horizon=1.5 * truth.step)
        except NotInterceptable:
            continue
    return None, None, None


def _estimate_at(ekf: EkfState, params: ShuttleParams, t: float, cfg: ScenarioConfig):
    if not ekf.initialized or ekf.t > t:
        return None
    return ekf_predict(ekf, params, t, cfg.ekf)


def run_episode(
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    *,
    index: int = 0,
    launch: ShuttleState | None = None,
    camera_script: str | None = None,
    cell: tuple[float, float] | None = None,
) -> EpisodeRecord:
    """Simulate one episode.

    ``rng`` is split into a scenario stream (launch, swing height, aerodynamic
    length) and a sensor stream, so overriding the launch or the camera script
    leaves every other draw unchanged.
    """
    scen_rng, sensor_rng = rng.spawn(2)
    swing_rel = float(scen_rng.uniform(*cfg.swing_height_range))
    aero = cfg.shuttle.aero_length
    if cfg.shuttle.randomize_aero_length:
        aero = float(scen_rng.uniform(*cfg.shuttle.aero_length_range))
    params = cfg.shuttle.params(aero)
    script = cfg.camera.script if camera_script is None else camera_script
    full = cfg.log_level == "full"
    swing_height = cfg.base_height + swing_rel

    if launch is None and cfg.nominal_launch:
        launch = cfg.launch.mean()
    if launch is None:
        # draw from the pool of flights that reach the swing height
        b = cfg.launch.bounds
        for _ in range(MAX_LAUNCH_DRAWS):
            launch = ShuttleState.from_tuple(0.0, scen_rng.uniform(b[:, 0], b[:, 1]))
            truth = simulate(launch, params, cfg.dt, z_below=cfg.z_below)
            t_swing, p_swing, v_swing = _true_crossing(truth, params, swing_height)
            if t_swing is not None:
                break
    else:
        truth = simulate(launch, params, cfg.dt, z_below=cfg.z_below)
        t_swing, p_swing, v_swing = _true_crossing(truth, params, swing_height)
    land = find_crossing_in_trajectory(truth, cfg.court.ground_height)
    landing = None if land is None else [float(land.p[0]), float(land.p[1])]
    true_qualified = qualify_trajectory(truth, cfg.court)

    track = build_camera_track(cfg.camera, truth.t, truth.p, script)
    period = 1.0 / cfg.camera.frame_rate
    n_frames = int(math.floor((truth.t[-1] - launch.t) / period + 1e-9)) + 1
    raw = []
    for j in range(n_frames):
        t = launch.t + j * period
        m = observe(track, truth.state_at(t), cfg.noise_model, sensor_rng, cfg.ang_rate_source)
        if m is not None:
            raw.append(m)
    delivered = _deliver(raw)

    ekf = EkfState()
    snapshot = None  # filter state frozen at the swing time
    target = None
    first_qualified = None
    n_resets = 0
    meas_log, ekf_log, target_log = [], [], []
    for m in delivered:
        if t_swing is not None and snapshot is None and m.t_available > t_swing:
            snapshot = _estimate_at(ekf, params, t_swing, cfg)
            snapshot = snapshot if snapshot is not None else EkfState()
        before = ekf
        ekf = ekf_ingest(ekf, m, params, cfg.ekf)
        if ekf.n_updates == 1 and ekf is not before:
            n_resets += 1
        now = m.t_available
        if full:
            meas_log.append(m.to_dict())
            ekf_log.append({"t_available": now, **ekf.to_dict()})
        if cfg.predict_targets:
            fresh, ok = predict_qualified_interception(
                ekf, params, cfg.court, swing_rel, cfg.base_height, now=now, dt=cfg.prediction_dt
            )
            fresh = fresh if ok else None
            target = target_persistence(target, now, fresh, cfg.target_hold)
            if fresh is not None:
                if first_qualified is None:
                    first_qualified = now
                if full:
                    target_log.append(fresh.to_dict())
    if t_swing is not None and snapshot is None:
        snapshot = _estimate_at(ekf, params, t_swing, cfg)

    epsilon = nees_val = est = None
    if snapshot is not None and snapshot.initialized:
        est = snapshot.position
        epsilon = perception_error(p_swing, est)
        nees_val = nees(snapshot, np.concatenate([p_swing, v_swing]))

    return EpisodeRecord(
        index=index,
        camera_script=script,
        launch={"t": float(launch.t), "p": _vec(launch.p), "v": _vec(launch.v)},
        aero_length=float(aero),
        swing_height=float(swing_height),
        true_crossing=None if t_swing is None else {"t": float(t_swing), "p": _vec(p_swing), "v": _vec(v_swing)},
        landing=landing,
        true_qualified=bool(true_qualified),
        epsilon=_f(epsilon),
        nees=_f(nees_val),
        estimate_at_swing=_vec(est),
        qualified=first_qualified is not None,
        registration_delay=None if first_qualified is None else float(first_qualified - launch.t),
        n_frames=n_frames,
        n_measurements=len(delivered),
        n_resets=n_resets,
        cell=None if cell is None else [float(c) for c in cell],
        measurements=meas_log,
        ekf_log=ekf_log,
        targets=target_log,
    )


def episode_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for episode ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng([seed, index])
