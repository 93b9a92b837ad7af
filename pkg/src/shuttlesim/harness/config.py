"""Scenario configuration: dataclasses plus a strict JSON loader.

Unknown keys and ill-typed values raise :class:`ConfigError` naming the
offending key path (``camera.pitch_deg``), which the CLI maps to exit code 2.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

from ..dynamics import DEFAULT_DT, DEFAULT_Z_BELOW, LaunchDistribution, ShuttleParams
from ..estimation import EkfConfig
from ..perception import NoiseModel
from ..prediction import CourtGeometry

SCHEMA_VERSION = 1
SEED_ENV = "SHUTTLE_SIM_SEED"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True)
class ShuttleConfig:
    mass: float = 0.005
    aero_length: float = 4.1
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81)
    # unvalidated range; episodes draw L from it only when randomize_aero_length is set
    aero_length_range: tuple[float, float] = (3.7, 4.5)
    randomize_aero_length: bool = False

    def __post_init__(self):
        lo, hi = self.aero_length_range
        if not 0 < lo <= hi:
            raise ValueError("aero_length_range must satisfy 0 < lo <= hi")

    def params(self, aero_length: float | None = None) -> ShuttleParams:
        return ShuttleParams(self.mass, self.aero_length if aero_length is None else aero_length, self.gravity)


@dataclass(frozen=True)
class CameraConfig:
    script: str = "fixed"
    position: tuple[float, float, float] = (0.0, 0.0, 0.6)
    yaw_deg: float = 0.0
    pitch_deg: float = 30.0
    h_fov_deg: float = 110.0
    v_fov_deg: float = 70.0
    frame_rate: float = 60.0
    latency: tuple[float, float] = (0.06, 0.16)
    max_rate: float = 3.0
    # (time s, pitch deg) pairs for the pitch_profile script
    keyframes: tuple[tuple[float, float], ...] = ((0.0, 20.0), (0.5, 5.0), (0.9, 45.0), (1.3, 10.0))

    def __post_init__(self):
        if self.script not in ("fixed", "tracking", "pitch_profile"):
            raise ValueError(f"unknown camera script {self.script!r}")
        if not self.max_rate > 0:
            raise ValueError("max_rate must be > 0")
        if self.script == "pitch_profile" and len(self.keyframes) == 0:
            raise ValueError("pitch_profile needs at least one keyframe")


@dataclass(frozen=True)
class SweepConfig:
    x_range: tuple[float, float] = (-3.0, 3.0)
    y_range: tuple[float, float] = (-3.0, 3.0)
    nx: int = 7
    ny: int = 7
    episodes_per_cell: int = 1650

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or self.episodes_per_cell < 1:
            raise ValueError("sweep grid sizes and episodes_per_cell must be >= 1")
        if not (self.x_range[0] <= self.x_range[1] and self.y_range[0] <= self.y_range[1]):
            raise ValueError("sweep ranges must satisfy lo <= hi")

    def cells(self) -> list[tuple[float, float]]:
        xs = _linspace(*self.x_range, self.nx)
        ys = _linspace(*self.y_range, self.ny)
        return [(x, y) for x in xs for y in ys]


@dataclass(frozen=True)
class GridConfig:
    """Heatmap bins over landing position."""

    x_range: tuple[float, float] = (-3.5, 3.5)
    y_range: tuple[float, float] = (-3.5, 3.5)
    nx: int = 7
    ny: int = 7

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid sizes must be >= 1")
        if not (self.x_range[0] < self.x_range[1] and self.y_range[0] < self.y_range[1]):
            raise ValueError("grid ranges must satisfy lo < hi")


def _linspace(lo: float, hi: float, n: int) -> list[float]:
    if n == 1:
        return [0.5 * (lo + hi)]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    episodes: int = 1
    dt: float = DEFAULT_DT
    prediction_dt: float = 1.0 / 60.0
    z_below: float = DEFAULT_Z_BELOW
    shuttle: ShuttleConfig = field(default_factory=ShuttleConfig)
    launch: LaunchDistribution = field(default_factory=LaunchDistribution)
    nominal_launch: bool = False
    noise_model: NoiseModel = field(default_factory=NoiseModel)
    ang_rate_source: str = "los"
    camera: CameraConfig = field(default_factory=CameraConfig)
    ekf: EkfConfig = field(default_factory=EkfConfig)
    court: CourtGeometry = field(default_factory=CourtGeometry)
    swing_height_range: tuple[float, float] = (0.9, 1.4)
    base_height: float = 0.5
    target_hold: float = 2.0
    predict_targets: bool = True
    regions: tuple[float, ...] = (0.0, 1.2, 2.4, 3.6)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    log_level: str = "summary"

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not (self.dt > 0 and self.prediction_dt > 0):
            raise ValueError("time steps must be > 0")
        lo, hi = self.swing_height_range
        if not lo <= hi:
            raise ValueError("swing_height_range must satisfy lo <= hi")
        if self.ang_rate_source not in ("los", "body"):
            raise ValueError(f"unknown ang_rate_source {self.ang_rate_source!r}")
        if self.log_level not in ("summary", "full"):
            raise ValueError(f"unknown log_level {self.log_level!r}")
        if len(self.regions) < 2 or any(b <= a for a, b in zip(self.regions, self.regions[1:])):
            raise ValueError("regions must be at least two strictly increasing band edges")

    def with_overrides(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["noise_model"] = self.noise_model.to_dict() | {"std_floor": self.noise_model.std_floor}
        return {"schema_version": SCHEMA_VERSION, **d}


# --- loader ------------------------------------------------------------------


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _coerce(tp, value, path: str, base_dir: Path | None):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        non_none = [a for a in args if a is not type(None)]
        return _coerce(non_none[0], value, path, base_dir)
    if tp is NoiseModel:
        return _noise_model(value, path, base_dir)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path, base_dir)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(path, "expected a finite number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v, f"{path}[{i}]", base_dir) for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(path, f"expected {len(args)} values, got {len(value)}")
        return tuple(_coerce(a, v, f"{path}[{i}]", base_dir) for i, (a, v) in enumerate(zip(args, value)))
    raise ConfigError(path, f"unsupported config type {tp}")


def _noise_model(value, path: str, base_dir: Path | None) -> NoiseModel:
    if isinstance(value, str):
        p = Path(value)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        try:
            value = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(path, f"cannot read noise model file {p}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(path, f"noise model file {p} is not valid JSON: {exc}") from None
    if not isinstance(value, dict):
        raise ConfigError(path, "expected a noise model object or file path")
    unknown = set(value) - {"detect", "noise_std", "std_floor", "range_std_ratio"}
    if unknown:
        raise ConfigError(_join(path, sorted(unknown)[0]), "unknown key")
    kwargs = {}
    for section, prefix in (("detect", "detect_"), ("noise_std", "std_")):
        sub = value.get(section)
        if sub is None:
            raise ConfigError(_join(path, section), "missing key")
        if not isinstance(sub, dict):
            raise ConfigError(_join(path, section), "expected an object")
        for k in sub:
            if k not in ("intercept", "per_distance", "per_angvel"):
                raise ConfigError(_join(path, f"{section}.{k}"), "unknown key")
        for k in ("intercept", "per_distance", "per_angvel"):
            if k not in sub:
                raise ConfigError(_join(path, f"{section}.{k}"), "missing key")
            kwargs[prefix + k] = _coerce(float, sub[k], _join(path, f"{section}.{k}"), base_dir)
    if "std_floor" in value:
        kwargs["std_floor"] = _coerce(float, value["std_floor"], _join(path, "std_floor"), base_dir)
    if "range_std_ratio" in value:
        kwargs["range_std_ratio"] = _coerce(float, value["range_std_ratio"], _join(path, "range_std_ratio"), base_dir)
    try:
        return NoiseModel(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _build(cls, data, path: str, base_dir: Path | None):
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key == "schema_version" and not path:
            continue
        if key not in names:
            raise ConfigError(_join(path, key), "unknown key")
        kwargs[key] = _coerce(hints[key], value, _join(path, key), base_dir)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path or "config", str(exc)) from None


def config_from_dict(data: dict, base_dir: Path | None = None) -> ScenarioConfig:
    version = data.get("schema_version", SCHEMA_VERSION) if isinstance(data, dict) else None
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported schema version {version!r}")
    return _build(ScenarioConfig, data, "", base_dir)


def load_config(path: str | Path | None = None, seed: int | None = None) -> ScenarioConfig:
    """Load a JSON scenario; the env seed overrides the file, ``seed`` overrides both."""
    if path is None:
        cfg = ScenarioConfig()
    else:
        p = Path(path)
        try:
            data = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError("", f"cannot read config {p}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"config {p} is not valid JSON: {exc}") from None
        cfg = config_from_dict(data, p.parent)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            cfg = cfg.with_overrides(seed=int(env))
        except ValueError:
            raise ConfigError("seed", f"{SEED_ENV}={env!r} is not an integer") from None
    if seed is not None:
        cfg = cfg.with_overrides(seed=seed)
    return cfg
