"""Episode orchestration, sweeps, heatmaps and the command-line interface."""

from .camera import build_camera_track
from .config import (
    CameraConfig,
    ConfigError,
    GridConfig,
    ScenarioConfig,
    ShuttleConfig,
    SweepConfig,
    config_from_dict,
    load_config,
)
from .episode import EpisodeRecord, episode_rng, run_episode
from .heatmap import Heatmap, aggregate_heatmap, region_stats, registration_delay_stats
from .io import read_jsonl, write_jsonl
from .sweep import nominal_landing, run_batch, run_paired, run_sweep
