"""Per-cell and per-region statistics of an episode metric keyed by landing position."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .config import GridConfig
from .episode import EpisodeRecord

Metric = Callable[[Any], "float | None"]


def _field(rec, name: str):
    return rec.get(name) if isinstance(rec, dict) else getattr(rec, name)


def metric_selector(metric: str | Metric) -> Metric:
    """Callable for a record field name such as ``"epsilon"``, or ``metric`` itself."""
    if callable(metric):
        return metric
    return lambda rec: _field(rec, metric)


def landing_of(rec) -> tuple[float, float] | None:
    land = _field(rec, "landing")
    return None if land is None else (float(land[0]), float(land[1]))


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Court-aligned grid; ``mean`` and ``std`` are NaN where ``count`` is 0."""

    x_edges: np.ndarray
    y_edges: np.ndarray
    count: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def empty(self) -> np.ndarray:
        return self.count == 0

    def cell_index(self, x: float, y: float) -> tuple[int, int] | None:
        i = _bin(self.x_edges, x)
        j = _bin(self.y_edges, y)
        return None if i is None or j is None else (i, j)

    def to_csv(self, path: str | Path) -> None:
        """One row per cell; empty cells have blank mean and std."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x_lo", "x_hi", "y_lo", "y_hi", "count", "mean", "std"])
            for i in range(len(self.x_edges) - 1):
                for j in range(len(self.y_edges) - 1):
                    n = int(self.count[i, j])
                    mean = "" if n == 0 else repr(float(self.mean[i, j]))
                    std = "" if n == 0 else repr(float(self.std[i, j]))
                    w.writerow([repr(float(self.x_edges[i])), repr(float(self.x_edges[i + 1])),
                                repr(float(self.y_edges[j])), repr(float(self.y_edges[j + 1])), n, mean, std])


def _bin(edges: np.ndarray, v: float) -> int | None:
    if not (edges[0] <= v <= edges[-1]):
        return None
    return int(min(np.searchsorted(edges, v, side="right") - 1, len(edges) - 2))


def aggregate_heatmap(records: Sequence, metric: str | Metric, grid: GridConfig) -> Heatmap:
    """Mean, population std and count of ``metric`` per landing cell.

    Records without a landing point, outside the grid, or whose metric is
    undefined are skipped; cells with no samples stay empty (NaN), never 0.
    """
    if len(records) == 0:
        raise ValueError("cannot aggregate an empty record set")
    sel = metric_selector(metric)
    x_edges = np.linspace(*grid.x_range, grid.nx + 1)
    y_edges = np.linspace(*grid.y_range, grid.ny + 1)
    values: dict[tuple[int, int], list[float]] = {}
    for rec in records:
        land = landing_of(rec)
        val = sel(rec)
        if land is None or val is None or not math.isfinite(val):
            continue
        i, j = _bin(x_edges, land[0]), _bin(y_edges, land[1])
        if i is None or j is None:
            continue
        values.setdefault((i, j), []).append(float(val))
    count = np.zeros((grid.nx, grid.ny), dtype=int)
    mean = np.full((grid.nx, grid.ny), np.nan)
    std = np.full((grid.nx, grid.ny), np.nan)
    for (i, j), vals in values.items():
        # sort so the float sum does not depend on record order
        v = np.sort(np.array(vals))
        count[i, j] = len(v)
        mean[i, j] = v.mean()
        std[i, j] = v.std()
    return Heatmap(x_edges, y_edges, count, mean, std)


def region_stats(
    records: Iterable,
    metric: str | Metric,
    bands: Sequence[float] = (0.0, 1.2, 2.4, 3.6),
    center: tuple[float, float] = (0.0, 0.0),
) -> list[dict]:
    """Metric statistics in concentric distance bands of the landing point
    around ``center``; the last band is closed on the right."""
    sel = metric_selector(metric)
    groups: list[list[float]] = [[] for _ in range(len(bands) - 1)]
    for rec in records:
        land = landing_of(rec)
        val = sel(rec)
        if land is None or val is None or not math.isfinite(val):
            continue
        r = math.hypot(land[0] - center[0], land[1] - center[1])
        for k in range(len(bands) - 1):
            last = k == len(bands) - 2
            if bands[k] <= r < bands[k + 1] or (last and r == bands[k + 1]):
                groups[k].append(float(val))
                break
    out = []
    for k, vals in enumerate(groups):
        v = np.sort(np.array(vals))
        out.append({
            "region": chr(ord("a") + k),
            "r_lo": float(bands[k]),
            "r_hi": float(bands[k + 1]),
            "count": len(v),
            "mean": float(v.mean()) if len(v) else None,
            "std": float(v.std()) if len(v) else None,
        })
    return out


def registration_delay_stats(records: Iterable) -> dict:
    """Mean and std of the registration delay over qualified episodes, with their count."""
    vals = np.sort(np.array([
        float(_field(r, "registration_delay")) for r in records
        if _field(r, "qualified") and _field(r, "registration_delay") is not None
    ]))
    return {
        "count": len(vals),
        "mean": float(vals.mean()) if len(vals) else None,
        "std": float(vals.std()) if len(vals) else None,
    }


def write_region_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "r_lo", "r_hi", "count", "mean", "std"])
        for r in rows:
            w.writerow([r["region"], r["r_lo"], r["r_hi"], r["count"],
                        "" if r["mean"] is None else repr(r["mean"]),
                        "" if r["std"] is None else repr(r["std"])])
