"""Command-line entry point: ``crashcast {run,simulate,eval,compare}``.

Exit codes: 0 success, 1 configuration or scenario-spec error, 2 input
parse / ordering error or missing ground truth, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .collision import CollisionEngine, GATING_MODES, read_alerts, write_alerts
from .config import RunSettings, load_config, with_overrides
from .evaluation import compare_predictors, evaluate, write_records
from .ingest import FORMATS, ParseError, group_by_frame, interpolate_gaps, read_states
from .predictor import ConfigError, parse_predictor
from .simulator import SpecError, default_suite, generate, load_specs, read_gt, write_scene
from .trajectory import OrderingError

log = logging.getLogger("crashcast")

EXIT_CONFIG, EXIT_INPUT, EXIT_IO = 1, 2, 3


class MissingGroundTruth(Exception):
    pass


def _scene_name(path: Path) -> str:
    name = path.name
    for suffix in (".tracks.jsonl", ".jsonl", ".txt", ".csv"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def _track_files(path: Path, fmt: str) -> List[Path]:
    if path.is_dir():
        pattern = "*.tracks.jsonl" if fmt == "records" else "*.txt"
        files = sorted(path.glob(pattern))
        if fmt == "mot":
            files += sorted(path.glob("*.csv"))
        return files
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    return [path]


def _load_frames(path: Path, settings: RunSettings):
    states = read_states(path, settings.format)
    return group_by_frame(interpolate_gaps(states, settings.engine.max_gap))


def run_one(path: Path, out_dir: Path, settings: RunSettings) -> dict:
    """Stream one track file through a fresh engine; write alerts and summary."""
    started = time.perf_counter()
    frames = _load_frames(path, settings)
    engine = CollisionEngine(settings.engine)
    alerts = engine.run(frames)
    wall = time.perf_counter() - started

    name = _scene_name(path)
    write_alerts(out_dir / f"{name}.alerts.jsonl", alerts, settings.engine.fps)
    summary = {
        "scene": name,
        "input": str(path),
        "frames_processed": engine.frames_processed,
        "objects_seen": len(engine.objects_seen),
        "alerts": len(alerts),
        "suppressed_by_cooldown": engine.suppressed,
        "wall_time_s": round(wall, 6),
        "config": settings.as_dict(),
    }
    with open(out_dir / f"{name}.summary.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(summary, indent=2) + "\n")
    return summary


def _map(fn, items, parallel: bool):
    if parallel and len(items) > 1:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(fn, *zip(*items)))
    return [fn(*item) for item in items]


def cmd_run(args, settings: RunSettings) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = _track_files(Path(args.input), settings.format)
    log.info("effective config: %s", json.dumps(settings.as_dict(), sort_keys=True))
    summaries = _map(run_one, [(f, out, settings) for f in files], args.parallel)
    for s in summaries:
        print(
            f"{s['scene']}: frames={s['frames_processed']} objects={s['objects_seen']} "
            f"alerts={s['alerts']} wall_time={s['wall_time_s']:.3f}s"
        )
    return 0


def cmd_simulate(args, settings: RunSettings) -> int:
    if args.suite:
        specs = default_suite(args.seed or 0)
    elif args.input:
        specs = load_specs(args.input)
        if args.seed is not None:
            specs = [replace(s, seed=args.seed + i) for i, s in enumerate(specs)]
    else:
        raise ConfigError("simulate needs --input SPEC.json or --suite")
    out = Path(args.out)
    e = settings.engine
    for i, spec in enumerate(specs):
        name = spec.name or (f"scene{i + 1}" if len(specs) > 1 else "scene")
        frames, gt = generate(spec, e.P, e.Q)
        tracks, sidecar = write_scene(out, name, frames, gt)
        print(f"{name}: {tracks.name} {sidecar.name} collision_frame={gt.collision_frame}")
    return 0


def _gt_for(name: str, dirs: Sequence[Path]) -> Path:
    for d in dirs:
        candidate = d / f"{name}.gt.json"
        if candidate.exists():
            return candidate
    raise MissingGroundTruth(f"no ground truth sidecar {name}.gt.json for scene {name!r}")


def _write_report(out: Path, stem: str, report):
    out.mkdir(parents=True, exist_ok=True)
    table = report.to_table()
    (out / f"{stem}.txt").write_text(table, encoding="utf-8")
    write_records(out / f"{stem}.jsonl", report.records())
    print(table, end="")


def cmd_eval(args, settings: RunSettings) -> int:
    src = Path(args.input)
    if not src.is_dir():
        raise FileNotFoundError(f"eval input must be a directory: {src}")
    gt_dirs = [Path(args.gt)] if args.gt else [src]
    scenes = []
    for alerts_path in sorted(src.glob("*.alerts.jsonl")):
        name = alerts_path.name[: -len(".alerts.jsonl")]
        gt = read_gt(_gt_for(name, gt_dirs))
        scenes.append((name, read_alerts(alerts_path), gt))
    report = evaluate(scenes, settings.lookahead)
    _write_report(Path(args.out), "eval_report", report)
    return 0


def cmd_compare(args, settings: RunSettings) -> int:
    src = Path(args.input)
    if not src.is_dir():
        raise FileNotFoundError(f"compare input must be a directory: {src}")
    given = [parse_predictor(p) for p in (args.predictor or [])]
    if len(given) > 2:
        raise ConfigError("compare takes at most two --predictor values")
    if len(given) == 0:
        given = [settings.engine.predictor, parse_predictor("least_squares:degree=2")]
    elif len(given) == 1:
        given = [settings.engine.predictor, given[0]]
    scenes = []
    gt_dirs = [Path(args.gt)] if args.gt else [src]
    for path in _track_files(src, settings.format):
        name = _scene_name(path)
        gt = read_gt(_gt_for(name, gt_dirs))
        scenes.append((name, _load_frames(path, settings), gt))
    report = compare_predictors(scenes, settings.engine, given[0], given[1], settings.lookahead)
    _write_report(Path(args.out), "compare_report", report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crashcast", description="Collision forecasting from object tracks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log the effective configuration")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--input", required=needs_input, help="input file or directory")
        p.add_argument("--format", choices=FORMATS, help="track file format (default: records)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--gating", choices=GATING_MODES)
        p.add_argument("--parallel", action="store_true", help="process scenes in parallel")

    run = sub.add_parser("run", help="stream track file(s) through the engine")
    common(run)
    run.add_argument("--predictor", help="e.g. constant_velocity:k=3 or least_squares:degree=2")

    sim = sub.add_parser("simulate", help="generate synthetic scenes with ground truth")
    common(sim, needs_input=False)
    sim.add_argument("--suite", action="store_true", help="generate the built-in eight-scene suite")

    ev = sub.add_parser("eval", help="score alert files against ground truth sidecars")
    common(ev)
    ev.add_argument("--gt", help="directory holding <scene>.gt.json (default: --input)")

    cmp_ = sub.add_parser("compare", help="compare two predictors on the same scenes")
    common(cmp_)
    cmp_.add_argument("--predictor", action="append", help="predictor spec; give twice")
    cmp_.add_argument("--gt", help="directory holding <scene>.gt.json (default: --input)")
    return parser


COMMANDS = {"run": cmd_run, "simulate": cmd_simulate, "eval": cmd_eval, "compare": cmd_compare}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = load_config(args.config)
        predictor = getattr(args, "predictor", None)
        settings = with_overrides(
            settings,
            gating=args.gating,
            predictor=parse_predictor(predictor) if isinstance(predictor, str) else None,
            fmt=args.format,
        )
        return COMMANDS[args.command](args, settings)
    except (ConfigError, SpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OrderingError, MissingGroundTruth) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
