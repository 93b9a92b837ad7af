"""Grid sweeps over landing position and paired camera comparisons, run
serially or on a process pool with results returned in task order."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from ..dynamics import ShuttleState, find_crossing_in_trajectory, simulate
from .config import ScenarioConfig
from .episode import EpisodeRecord, episode_rng, run_episode


def nominal_landing(cfg: ScenarioConfig) -> np.ndarray:
    """Ground crossing (x, y) of the mean launch under the nominal aerodynamics."""
    launch = cfg.launch.mean()
    traj = simulate(launch, cfg.shuttle.params(), cfg.dt, z_below=cfg.z_below)
    land = find_crossing_in_trajectory(traj, cfg.court.ground_height)
    if land is None:
        raise RuntimeError("nominal launch never reaches the ground")
    return land.p[:2].copy()


def _launch_for_cell(cfg: ScenarioConfig, landing: np.ndarray, cell) -> ShuttleState:
    base = cfg.launch.mean()
    offset = np.array([cell[0] - landing[0], cell[1] - landing[1], 0.0])
    return ShuttleState(base.t, base.p + offset, base.v)


def _run_task(task) -> EpisodeRecord:
    cfg, index, launch, script, cell = task
    return run_episode(cfg, episode_rng(cfg.seed, index), index=index, launch=launch, camera_script=script, cell=cell)


def _map(tasks: Sequence, jobs: int) -> list[EpisodeRecord]:
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks, chunksize=chunk))


def run_sweep(
    cfg: ScenarioConfig,
    cells: Iterable[tuple[float, float]] | None = None,
    *,
    episodes_per_cell: int | None = None,
    jobs: int = 1,
    camera_script: str | None = None,
) -> list[EpisodeRecord]:
    """Translate the nominal launch so its landing point falls on each cell.

    Episode ``i`` (cell-major order) uses the stream ``(seed, i)``; records
    carry their cell and come back in task order whatever ``jobs`` is.
    """
    cells = [tuple(float(v) for v in c) for c in (cfg.sweep.cells() if cells is None else cells)]
    if not all(np.all(np.isfinite(c)) for c in cells):
        raise ValueError("sweep cells must be finite")
    per_cell = cfg.sweep.episodes_per_cell if episodes_per_cell is None else episodes_per_cell
    landing = nominal_landing(cfg)
    tasks = []
    for ci, cell in enumerate(cells):
        launch = _launch_for_cell(cfg, landing, cell)
        for j in range(per_cell):
            tasks.append((cfg, ci * per_cell + j, launch, camera_script, cell))
    return _map(tasks, jobs)


def run_batch(
    cfg: ScenarioConfig,
    n: int | None = None,
    *,
    jobs: int = 1,
    camera_script: str | None = None,
    start: int = 0,
) -> list[EpisodeRecord]:
    """``n`` (default ``cfg.episodes``) episodes with launches drawn from the distribution."""
    n = cfg.episodes if n is None else n
    return _map([(cfg, start + i, None, camera_script, None) for i in range(n)], jobs)


def run_paired(
    cfg: ScenarioConfig,
    scripts: tuple[str, str] = ("tracking", "fixed"),
    n: int | None = None,
    *,
    jobs: int = 1,
) -> list[tuple[EpisodeRecord, EpisodeRecord]]:
    """The same episodes (launch, swing height and sensor draws) under two camera scripts."""
    a = run_batch(cfg, n, jobs=jobs, camera_script=scripts[0])
    b = run_batch(cfg, n, jobs=jobs, camera_script=scripts[1])
    return list(zip(a, b))
