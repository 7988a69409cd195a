"""The collision-forecasting engine.

Every frame the engine pushes observations into the track registry and
matures earlier predictions into residuals. On cadence frames (``frame % T
== 0``) it predicts ``Q`` frames ahead for each moving object observed in
that frame and looks for the earliest future frame at which two predicted
boxes overlap, or a predicted box overlaps a static object. Candidate alerts
go through the optional deviation gate and a per-pair cooldown.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .deviation import GateUnavailable, PredictionLedger, anomaly_flag
from .predictor import ConfigError, HorizonUnavailable, PredictorSpec, make_predictor
from .trajectory import BBox, Mobility, ObjectState, OrderingError, PredictedTrajectory, SceneRegistry

logger = logging.getLogger(__name__)

GATING_MODES = ("intersect_only", "deviation_gated")

ALERT_KEYS = (
    "emitted_at",
    "id_a",
    "id_b",
    "class_a",
    "class_b",
    "predicted_frame",
    "cx",
    "cy",
    "lead_frames",
    "lead_seconds",
)


@dataclass(frozen=True)
class EngineConfig:
    P: int = 10
    Q: int = 20
    T: int = 5
    fps: float = 30.0
    gating: str = "intersect_only"
    overlap_margin: float = 0.0
    dedup_cooldown: int = 30
    predictor: PredictorSpec = field(default_factory=PredictorSpec)
    eps_move: float = 3.0
    min_obs: int = 5
    max_gap: int = 5

    def __post_init__(self):
        checks = [
            ("P", self.P >= 2, "must be >= 2"),
            ("Q", self.Q >= 1, "must be >= 1"),
            ("T", self.T >= 1, "must be >= 1"),
            ("fps", self.fps > 0, "must be > 0"),
            ("overlap_margin", self.overlap_margin >= 0, "must be >= 0"),
            ("dedup_cooldown", self.dedup_cooldown >= 0, "must be >= 0"),
            ("eps_move", self.eps_move >= 0, "must be >= 0"),
            ("min_obs", self.min_obs >= 1, "must be >= 1"),
            ("max_gap", self.max_gap >= 0, "must be >= 0"),
        ]
        for name, ok, why in checks:
            if not ok:
                raise ConfigError(f"{name} {why}, got {getattr(self, name)!r}")
        for name in ("P", "Q", "T", "dedup_cooldown", "min_obs", "max_gap"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ConfigError(f"{name} must be an integer, got {getattr(self, name)!r}")
        if self.gating not in GATING_MODES:
            raise ConfigError(f"gating must be one of {GATING_MODES}, got {self.gating!r}")
        if not isinstance(self.predictor, PredictorSpec):
            raise ConfigError("predictor must be a PredictorSpec")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["predictor"] = {"kind": self.predictor.kind, **self.predictor.params()}
        return d


def canonical_pair(a: str, b: str) -> Tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class CollisionAlert:
    emitted_at: int
    pair: Tuple[str, str]
    predicted_frame: int
    cx: float
    cy: float
    classes: Tuple[str, str]

    def __post_init__(self):
        if self.predicted_frame <= self.emitted_at:
            raise ValueError("an alert must predict a frame after the one it is emitted at")
        if self.pair[0] > self.pair[1]:
            raise ValueError(f"alert pair {self.pair} is not in canonical order")

    @property
    def lead(self) -> int:
        return self.predicted_frame - self.emitted_at

    @property
    def location(self) -> Tuple[float, float]:
        return (self.cx, self.cy)

    def to_record(self, fps: float) -> dict:
        return {
            "emitted_at": self.emitted_at,
            "id_a": self.pair[0],
            "id_b": self.pair[1],
            "class_a": self.classes[0],
            "class_b": self.classes[1],
            "predicted_frame": self.predicted_frame,
            "cx": self.cx,
            "cy": self.cy,
            "lead_frames": self.lead,
            "lead_seconds": round(self.lead / fps, 4),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CollisionAlert":
        missing = [k for k in ALERT_KEYS if k not in rec]
        if missing:
            raise ValueError(f"alert record missing keys: {', '.join(missing)}")
        return cls(
            int(rec["emitted_at"]),
            (str(rec["id_a"]), str(rec["id_b"])),
            int(rec["predicted_frame"]),
            float(rec["cx"]),
            float(rec["cy"]),
            (str(rec["class_a"]), str(rec["class_b"])),
        )


def _make_alert(frame: int, id_a: str, class_a: str, id_b: str, class_b: str, hit_frame: int, cx, cy):
    if id_a > id_b:
        id_a, id_b, class_a, class_b = id_b, id_a, class_b, class_a
    return CollisionAlert(int(frame), (id_a, id_b), int(hit_frame), float(cx), float(cy), (class_a, class_b))


def boxes_overlap(a: BBox, b: BBox, margin: float = 0.0) -> bool:
    """Axis-aligned overlap test; touching edges count as overlap."""
    return abs(a.cx - b.cx) <= (a.w + b.w) / 2 + margin and abs(a.cy - b.cy) <= (a.h + b.h) / 2 + margin


def pair_intersection(
    tja: PredictedTrajectory, tjb: PredictedTrajectory, margin: float = 0.0
) -> Optional[Tuple[int, Tuple[float, float]]]:
    """Earliest shared target frame where the two predicted boxes overlap.

    Returns ``(frame, (cx, cy))`` with the midpoint of the two centers, or
    ``None`` when the trajectories never overlap at the same frame.
    """
    b_at = dict(zip(tjb.frames, tjb.points))
    for p in tja.points:
        other = b_at.get(p.frame)
        if other is not None and boxes_overlap(p.box, other.box, margin):
            return p.frame, ((p.box.cx + other.box.cx) / 2, (p.box.cy + other.box.cy) / 2)
    return None


def static_intersection(
    traj: PredictedTrajectory, static: BBox, margin: float = 0.0
) -> Optional[Tuple[int, Tuple[float, float]]]:
    for p in traj.points:
        if boxes_overlap(p.box, static, margin):
            return p.frame, ((p.box.cx + static.cx) / 2, (p.box.cy + static.cy) / 2)
    return None


class AlertDeduplicator:
    """Suppress repeat alerts for a pair within ``cooldown`` frames of its last emitted alert."""

    def __init__(self, cooldown: int = 30):
        self.cooldown = cooldown
        self._last: Dict[Tuple[str, str], int] = {}

    def admit(self, alert: CollisionAlert) -> bool:
        last = self._last.get(alert.pair)
        if last is not None and alert.emitted_at - last < self.cooldown:
            return False
        self._last[alert.pair] = alert.emitted_at
        return True


def dedup(alerts: Iterable[CollisionAlert], cooldown: int = 30) -> List[CollisionAlert]:
    gate = AlertDeduplicator(cooldown)
    return [a for a in alerts if gate.admit(a)]


def _first_hits(hit: np.ndarray) -> np.ndarray:
    """Index of the first True along the last axis, -1 where there is none."""
    first = hit.argmax(axis=-1)
    return np.where(hit.any(axis=-1), first, -1)


class CollisionEngine:
    """One engine per stream; feed frames in strictly increasing order."""

    def __init__(self, config: Optional[EngineConfig] = None):
        self.config = config or EngineConfig()
        c = self.config
        self.registry = SceneRegistry(P=c.P, Q=c.Q, min_obs=c.min_obs, eps_move=c.eps_move, max_gap=c.max_gap)
        self.ledger = PredictionLedger(c.Q)
        self.predictor = make_predictor(c.predictor)
        self.deduplicator = AlertDeduplicator(c.dedup_cooldown)
        self.last_frame: Optional[int] = None
        self.frames_processed = 0
        self.objects_seen: set = set()
        self.suppressed = 0

    def step(self, frame: int, observations: Sequence[ObjectState]) -> List[CollisionAlert]:
        if self.last_frame is not None and frame <= self.last_frame:
            raise OrderingError(f"frame {frame} arrived after frame {self.last_frame}")
        observations = sorted(observations, key=lambda o: o.object_id)
        for obs in observations:
            if obs.frame != frame:
                raise OrderingError(f"observation for {obs.object_id!r} has frame {obs.frame}, expected {frame}")
        self.last_frame = frame
        self.frames_processed += 1

        registry, ledger = self.registry, self.ledger
        for obs in observations:
            before = registry.windows.get(obs.object_id)
            registry.push_observation(obs)
            if before is not None and registry.windows[obs.object_id] is not before:
                ledger.forget(obs.object_id)
            ledger.compute_deviation(obs)
            self.objects_seen.add(obs.object_id)

        if frame % self.config.T:
            return []
        # stale targets are never matched again, so eviction can wait for the cadence frame
        ledger.evict(frame)

        trajectories: List[PredictedTrajectory] = []
        for obs in observations:
            window = registry.windows[obs.object_id]
            if window.mobility is not Mobility.MOVING:
                continue
            try:
                traj = self.predictor.predict(window, self.config.Q)
            except HorizonUnavailable:
                continue
            ledger.record_prediction(traj)
            trajectories.append(traj)

        candidates = self._candidates(frame, trajectories)
        if self.config.gating == "deviation_gated":
            candidates = [a for a in candidates if self._gate_passes(a, frame)]
        alerts = []
        for alert in sorted(candidates, key=lambda a: a.pair):
            if self.deduplicator.admit(alert):
                alerts.append(alert)
            else:
                self.suppressed += 1
        return alerts

    def _class_of(self, object_id: str) -> str:
        window = self.registry.windows.get(object_id)
        return window.last.class_label if window is not None and window.last is not None else "other"

    def _gate_passes(self, alert: CollisionAlert, frame: int) -> bool:
        for object_id in alert.pair:
            if object_id in self.registry.statics:
                continue
            dev = self.ledger.collect_deviation_set(object_id, frame)
            try:
                if anomaly_flag(dev):
                    return True
            except GateUnavailable:
                return True
        return False

    def _candidates(self, frame: int, trajectories: List[PredictedTrajectory]) -> List[CollisionAlert]:
        if not trajectories:
            return []
        margin = self.config.overlap_margin
        ids = [t.object_id for t in trajectories]
        classes = [t.class_label for t in trajectories]
        centers = np.array([t.centers for t in trajectories])  # (n, Q, 2)
        sizes = np.array([(t.w, t.h) for t in trajectories])  # (n, 2)

        out: List[CollisionAlert] = []
        n = len(trajectories)
        if n > 1:
            gap = np.abs(centers[:, None, :, :] - centers[None, :, :, :])  # (n, n, Q, 2)
            reach = (sizes[:, None, :] + sizes[None, :, :]) / 2 + margin  # (n, n, 2)
            hit = (gap <= reach[:, :, None, :]).all(axis=-1)
            first = _first_hits(hit)
            for i, j in zip(*np.nonzero(np.triu(first >= 0, k=1))):
                q = first[i, j]
                mid = (centers[i, q] + centers[j, q]) / 2
                out.append(_make_alert(frame, ids[i], classes[i], ids[j], classes[j], frame + q + 1, *mid))

        statics = [(sid, box) for sid, box in sorted(self.registry.statics.items()) if sid not in ids]
        if statics:
            s_centers = np.array([(b.cx, b.cy) for _, b in statics])  # (s, 2)
            s_sizes = np.array([(b.w, b.h) for _, b in statics])
            gap = np.abs(centers[:, None, :, :] - s_centers[None, :, None, :])  # (n, s, Q, 2)
            reach = (sizes[:, None, :] + s_sizes[None, :, :]) / 2 + margin
            hit = (gap <= reach[:, :, None, :]).all(axis=-1)
            first = _first_hits(hit)
            for i, j in zip(*np.nonzero(first >= 0)):
                q = first[i, j]
                mid = (centers[i, q] + s_centers[j]) / 2
                sid = statics[j][0]
                out.append(_make_alert(frame, ids[i], classes[i], sid, self._class_of(sid), frame + q + 1, *mid))
        return out

    def run(self, frames: Iterable[Tuple[int, Sequence[ObjectState]]]) -> List[CollisionAlert]:
        alerts: List[CollisionAlert] = []
        for frame, observations in frames:
            alerts.extend(self.step(frame, observations))
        return alerts


def write_alerts(path, alerts: Iterable[CollisionAlert], fps: float):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for alert in alerts:
            fh.write(json.dumps(alert.to_record(fps)) + "\n")


def read_alerts(path) -> List[CollisionAlert]:
    alerts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                alerts.append(CollisionAlert.from_record(json.loads(line)))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:line {lineno}: {exc}") from None
    return alerts
