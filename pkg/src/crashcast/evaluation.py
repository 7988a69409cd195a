"""Scoring alert streams against ground truth.

Metrics follow the usual surveillance-benchmark layout: time in advance (s),
frames in advance, and FP%. FP% counts alert *events*: the share of emitted
alerts (after dedup) that do not match the ground-truth collision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from .collision import CollisionAlert, CollisionEngine, EngineConfig
from .ingest import Frames
from .predictor import PredictorSpec
from .simulator import GroundTruthEvent

FP_DEFINITION = "FP% = 100 * false alert events / all alert events (event-based; 0 when no alerts)"
TABLE_COLUMNS = ("video", "time-in-advance", "frames-in-advance", "FP%")


@dataclass(frozen=True)
class SceneResult:
    name: str
    collision: bool
    tp: bool
    frames_in_advance: Optional[int]
    time_in_advance: Optional[float]
    fp_events: int
    total_alert_events: int
    fps: float = 30.0

    @property
    def time_in_advance_exact(self) -> Optional[Fraction]:
        """Lead time as an exact rational, so ``t * fps == frames`` holds without rounding."""
        if self.frames_in_advance is None:
            return None
        return Fraction(self.frames_in_advance) / Fraction(self.fps)

    @property
    def miss(self) -> bool:
        return self.collision and not self.tp

    @property
    def fp_percent(self) -> float:
        return 100.0 * self.fp_events / self.total_alert_events if self.total_alert_events else 0.0

    def to_record(self) -> dict:
        return {
            "video": self.name,
            "collision": self.collision,
            "tp": self.tp,
            "miss": self.miss,
            "time_in_advance": self.time_in_advance,
            "frames_in_advance": self.frames_in_advance,
            "fp_events": self.fp_events,
            "total_alert_events": self.total_alert_events,
            "fp_percent": self.fp_percent,
        }


def default_lookahead(fps: float) -> int:
    return int(round(3 * fps))


def match(
    alerts: Sequence[CollisionAlert],
    gt: GroundTruthEvent,
    lookahead: Optional[int] = None,
    name: str = "",
) -> SceneResult:
    """Classify each alert as a hit on the ground-truth collision or a false positive.

    An alert is a true positive when its pair equals the ground-truth pair and
    it was emitted in ``[collision_frame - lookahead, collision_frame)``.
    """
    if lookahead is None:
        lookahead = default_lookahead(gt.fps)
    tps = []
    if gt.is_collision:
        lo, hi = gt.collision_frame - lookahead, gt.collision_frame
        tps = [a for a in alerts if a.pair == tuple(gt.pair) and lo <= a.emitted_at < hi]
    fp = len(alerts) - len(tps)
    if tps:
        earliest = min(a.emitted_at for a in tps)
        frames = gt.collision_frame - earliest
        return SceneResult(name, True, True, frames, frames / gt.fps, fp, len(alerts), gt.fps)
    return SceneResult(name, gt.is_collision, False, None, None, fp, len(alerts), gt.fps)


@dataclass
class EvalReport:
    scenes: List[SceneResult] = field(default_factory=list)

    @property
    def fp_events(self) -> int:
        return sum(s.fp_events for s in self.scenes)

    @property
    def total_alert_events(self) -> int:
        return sum(s.total_alert_events for s in self.scenes)

    @property
    def fp_percent(self) -> float:
        total = self.total_alert_events
        return 100.0 * self.fp_events / total if total else 0.0

    @property
    def misses(self) -> int:
        return sum(1 for s in self.scenes if s.miss)

    @property
    def mean_time_in_advance(self) -> float:
        hits = [s.time_in_advance for s in self.scenes if s.tp]
        # fsum is exactly rounded, so the mean does not depend on scene order
        return math.fsum(hits) / len(hits) if hits else 0.0

    @property
    def mean_frames_in_advance(self) -> float:
        hits = [s.frames_in_advance for s in self.scenes if s.tp]
        return sum(hits) / len(hits) if hits else 0.0

    def aggregate(self) -> dict:
        return {
            "video": "all",
            "scenes": len(self.scenes),
            "misses": self.misses,
            "mean_time_in_advance": self.mean_time_in_advance,
            "mean_frames_in_advance": self.mean_frames_in_advance,
            "fp_events": self.fp_events,
            "total_alert_events": self.total_alert_events,
            "fp_percent": self.fp_percent,
        }

    def records(self) -> List[dict]:
        return [s.to_record() for s in self.scenes] + [self.aggregate()]

    def to_table(self) -> str:
        rows = [_row(s.name, s.time_in_advance, s.frames_in_advance, s.fp_percent) for s in self.scenes]
        agg = _row("all", self.mean_time_in_advance, self.mean_frames_in_advance, self.fp_percent, mean=True)
        return f"# {FP_DEFINITION}\n# missed collisions: {self.misses}\n" + _align([list(TABLE_COLUMNS)] + rows + [agg])


def _seconds(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def _row(name, seconds, frames, fp, mean=False):
    if frames is None:
        frames_text = "-"
    elif mean:
        frames_text = f"{frames:.1f}"
    else:
        frames_text = str(frames)
    return [name, _seconds(seconds), frames_text, f"{fp:.1f}"]


def _align(rows: List[List[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


def evaluate(results: Iterable[Tuple[str, Sequence[CollisionAlert], GroundTruthEvent]],
             lookahead: Optional[int] = None) -> EvalReport:
    return EvalReport([match(alerts, gt, lookahead, name) for name, alerts, gt in results])


def run_engine(frames: Frames, config: EngineConfig) -> List[CollisionAlert]:
    return CollisionEngine(config).run(frames)


@dataclass
class CompareReport:
    label_a: str
    label_b: str
    a: EvalReport
    b: EvalReport

    def records(self) -> List[dict]:
        out = []
        for sa, sb in zip(self.a.scenes, self.b.scenes):
            out.append({
                "video": sa.name,
                "a": {"predictor": self.label_a, "fp_percent": sa.fp_percent, "time_in_advance": sa.time_in_advance},
                "b": {"predictor": self.label_b, "fp_percent": sb.fp_percent, "time_in_advance": sb.time_in_advance},
            })
        out.append({
            "video": "all",
            "a": {"predictor": self.label_a, "fp_percent": self.a.fp_percent,
                  "time_in_advance": self.a.mean_time_in_advance},
            "b": {"predictor": self.label_b, "fp_percent": self.b.fp_percent,
                  "time_in_advance": self.b.mean_time_in_advance},
        })
        return out

    def to_table(self) -> str:
        header = ["", self.label_a, "", self.label_b, ""]
        sub = ["video", "FP%", "time-in-advance", "FP%", "time-in-advance"]
        rows = [
            [sa.name, f"{sa.fp_percent:.1f}", _seconds(sa.time_in_advance), f"{sb.fp_percent:.1f}",
             _seconds(sb.time_in_advance)]
            for sa, sb in zip(self.a.scenes, self.b.scenes)
        ]
        rows.append(["all", f"{self.a.fp_percent:.1f}", _seconds(self.a.mean_time_in_advance),
                     f"{self.b.fp_percent:.1f}", _seconds(self.b.mean_time_in_advance)])
        return f"# {FP_DEFINITION}\n" + _align([header, sub] + rows)


def compare_predictors(
    scenes: Sequence[Tuple[str, Frames, GroundTruthEvent]],
    config: EngineConfig,
    spec_a: PredictorSpec,
    spec_b: PredictorSpec,
    lookahead: Optional[int] = None,
) -> CompareReport:
    """Run the same scenes under the same engine config with two predictors."""
    reports = []
    for spec in (spec_a, spec_b):
        cfg = replace(config, predictor=spec)
        reports.append(evaluate(((name, run_engine(frames, cfg), gt) for name, frames, gt in scenes), lookahead))
    return CompareReport(spec_a.label, spec_b.label, *reports)


def write_records(path, records: Iterable[dict]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
