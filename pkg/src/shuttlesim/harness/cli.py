"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..dynamics import Trajectory
from ..perception import fit_noise_model_detailed, read_fit_csv
from ..prediction import qualify_trajectory
from .config import ConfigError, load_config
from .episode import episode_rng, run_episode
from .heatmap import aggregate_heatmap, region_stats, registration_delay_stats, write_region_csv
from .io import read_jsonl, write_jsonl
from .sweep import run_sweep

SCRIPTS = ("fixed", "tracking", "pitch_profile")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", type=Path, default=d, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=d, help="RNG seed (overrides config and SHUTTLE_SIM_SEED)")
    p.add_argument("--out", type=Path, default=argparse.SUPPRESS if suppress else Path("out"),
                   help="output directory (default: out)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker processes (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shuttlesim", description="Shuttlecock perception and interception simulator.")
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one episode with full logs")
    _global_flags(p, suppress=True)
    p.add_argument("--index", type=int, default=0, help="episode index within the seeded run")
    p.add_argument("--script", choices=SCRIPTS, help="camera script (default from config)")

    p = sub.add_parser("sweep", help="evaluate a grid of landing positions")
    _global_flags(p, suppress=True)
    p.add_argument("--episodes-per-cell", type=int)
    p.add_argument("--script", choices=SCRIPTS)
    p.add_argument("--metric", default="epsilon")

    p = sub.add_parser("fit-noise", help="fit the detection and noise-std model from a CSV")
    _global_flags(p, suppress=True)
    p.add_argument("samples", type=Path, help="CSV with distance,ang_rate,detected,error_norm")
    p.add_argument("--output", type=Path, help="model JSON path (default: <out>/noise_model.json)")

    p = sub.add_parser("heatmap", help="aggregate JSON-lines records into a CSV grid")
    _global_flags(p, suppress=True)
    p.add_argument("records", type=Path)
    p.add_argument("--metric", default="epsilon")

    p = sub.add_parser("qualify", help="two-rectangle verdict for trajectory CSVs")
    _global_flags(p, suppress=True)
    p.add_argument("trajectories", type=Path, nargs="+")
    return parser


def _cmd_simulate(args, cfg) -> int:
    cfg = cfg.with_overrides(log_level="full")
    rec = run_episode(cfg, episode_rng(cfg.seed, args.index), index=args.index, camera_script=args.script)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "episode.json").write_text(rec.to_json() + "\n")
    summary = {k: rec.to_dict()[k] for k in ("index", "camera_script", "epsilon", "qualified", "registration_delay")}
    print(json.dumps(summary, sort_keys=True))
    return 0


def _write_aggregates(out: Path, records, metric: str, cfg) -> None:
    aggregate_heatmap(records, metric, cfg.grid).to_csv(out / "heatmap.csv")
    write_region_csv(out / "regions.csv", region_stats(records, metric, cfg.regions))


def _cmd_sweep(args, cfg) -> int:
    recs = run_sweep(cfg, episodes_per_cell=args.episodes_per_cell, jobs=args.jobs, camera_script=args.script)
    args.out.mkdir(parents=True, exist_ok=True)
    write_jsonl(args.out / "records.jsonl", recs)
    _write_aggregates(args.out, recs, args.metric, cfg)
    reg = registration_delay_stats(recs)
    print(json.dumps({"records": len(recs), "registration_delay": reg}, sort_keys=True))
    return 0


def _cmd_fit_noise(args, cfg) -> int:
    fit = fit_noise_model_detailed(read_fit_csv(args.samples), cfg.noise_model.std_floor)
    path = args.output if args.output is not None else args.out / "noise_model.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    fit.model.save(path)
    print(json.dumps({
        "output": str(path),
        "detect": {"coef": fit.detect_coef.tolist(), "se": fit.detect_se.tolist()},
        "noise_std": {"coef": fit.std_coef.tolist(), "se": fit.std_se.tolist()},
    }))
    return 0


def _cmd_heatmap(args, cfg) -> int:
    recs = read_jsonl(args.records)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_aggregates(args.out, recs, args.metric, cfg)
    return 0


def _cmd_qualify(args, cfg) -> int:
    for path in args.trajectories:
        verdict = qualify_trajectory(Trajectory.from_csv(path), cfg.court)
        print(f"{path}\t{'true' if verdict else 'false'}")
    return 0


COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "fit-noise": _cmd_fit_noise,
    "heatmap": _cmd_heatmap,
    "qualify": _cmd_qualify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, cfg)
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit 1
        logging.getLogger(__name__).debug("command failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
