"""Synthetic annotated traffic scenes.

Frames run from 1 to ``duration``. An object's center at frame ``f`` is
``start + velocity * (f - start_frame)``; an object with a ``turn_frame``
switches to ``turn_velocity`` for every displacement after that frame.
Ground truth is computed on the noiseless paths with the engine's own overlap
predicate (margin 0); Gaussian noise is added only to the emitted centers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np

from .collision import boxes_overlap, canonical_pair
from .ingest import Frames, group_by_frame, record_line
from .predictor import ConfigError
from .trajectory import BBox, ObjectState, normalize_class

KINDS = ("crossing", "parallel_near_miss", "sudden_turn", "pedestrian_cross", "rear_end")
COLLIDING_KINDS = ("crossing", "pedestrian_cross", "rear_end")


class SpecError(ConfigError):
    """A scenario spec is malformed or contradicts its own kind."""

    def __init__(self, message: str, field_name: Optional[str] = None):
        self.field = field_name
        super().__init__(message)


@dataclass(frozen=True)
class SimObject:
    object_id: str
    start: Tuple[float, float]
    velocity: Tuple[float, float]
    size: Tuple[float, float] = (20.0, 20.0)
    class_label: str = "car"
    start_frame: int = 1
    turn_frame: Optional[int] = None
    turn_velocity: Optional[Tuple[float, float]] = None

    def center(self, frame: int) -> Tuple[float, float]:
        t = frame - self.start_frame
        if self.turn_frame is None or frame <= self.turn_frame:
            return (self.start[0] + self.velocity[0] * t, self.start[1] + self.velocity[1] * t)
        t0 = self.turn_frame - self.start_frame
        t1 = frame - self.turn_frame
        return (
            self.start[0] + self.velocity[0] * t0 + self.turn_velocity[0] * t1,
            self.start[1] + self.velocity[1] * t0 + self.turn_velocity[1] * t1,
        )

    def box(self, frame: int) -> BBox:
        cx, cy = self.center(frame)
        return BBox(cx, cy, self.size[0], self.size[1])


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    objects: Tuple[SimObject, ...]
    duration: int = 120
    fps: float = 30.0
    noise_sigma: float = 0.0
    seed: int = 0
    name: str = ""

    def validate(self, P: int = 10, Q: int = 20):
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}", "kind")
        if self.duration < P + Q:
            raise SpecError(f"duration must be >= P+Q = {P + Q}, got {self.duration}", "duration")
        if not self.fps > 0:
            raise SpecError(f"fps must be > 0, got {self.fps}", "fps")
        if not (self.noise_sigma >= 0 and math.isfinite(self.noise_sigma)):
            raise SpecError(f"noise_sigma must be >= 0, got {self.noise_sigma}", "noise_sigma")
        if len(self.objects) < 1:
            raise SpecError("a scenario needs at least one object", "objects")
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SpecError(f"object ids must be unique, got {ids}", "objects")
        for o in self.objects:
            if not (o.size[0] > 0 and o.size[1] > 0):
                raise SpecError(f"object {o.object_id!r}: size must be positive", "size")
            if not 1 <= o.start_frame <= self.duration:
                raise SpecError(f"object {o.object_id!r}: start_frame outside [1, {self.duration}]", "start_frame")
            if o.turn_frame is not None:
                if o.turn_velocity is None:
                    raise SpecError(f"object {o.object_id!r}: turn_frame needs turn_velocity", "turn_velocity")
                if not o.start_frame <= o.turn_frame <= self.duration:
                    raise SpecError(
                        f"object {o.object_id!r}: turn_frame {o.turn_frame} outside [{o.start_frame}, {self.duration}]",
                        "turn_frame",
                    )
        if self.kind == "sudden_turn" and not any(o.turn_frame is not None for o in self.objects):
            raise SpecError("sudden_turn needs an object with turn_frame and turn_velocity", "turn_frame")
        if self.kind == "pedestrian_cross" and not any(o.class_label == "pedestrian" for o in self.objects):
            raise SpecError("pedestrian_cross needs a pedestrian object", "objects")


@dataclass(frozen=True)
class GroundTruthEvent:
    kind: str
    collision_frame: Optional[int]
    pair: Optional[Tuple[str, str]]
    fps: float
    seed: int

    @property
    def is_collision(self) -> bool:
        return self.collision_frame is not None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "collision_frame": self.collision_frame,
            "pair": list(self.pair) if self.pair else None,
            "fps": self.fps,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthEvent":
        pair = d.get("pair")
        return cls(
            d["kind"],
            None if d.get("collision_frame") is None else int(d["collision_frame"]),
            tuple(str(p) for p in pair) if pair else None,
            float(d["fps"]),
            int(d.get("seed", 0)),
        )


def ground_truth(spec: ScenarioSpec) -> GroundTruthEvent:
    """First frame at which any two noiseless boxes overlap."""
    for frame in range(1, spec.duration + 1):
        present = sorted((o for o in spec.objects if o.start_frame <= frame), key=lambda o: o.object_id)
        for a, b in combinations(present, 2):
            if boxes_overlap(a.box(frame), b.box(frame)):
                return GroundTruthEvent(spec.kind, frame, canonical_pair(a.object_id, b.object_id), spec.fps, spec.seed)
    return GroundTruthEvent(spec.kind, None, None, spec.fps, spec.seed)


def _check_kind(spec: ScenarioSpec, gt: GroundTruthEvent):
    if spec.kind in COLLIDING_KINDS and not gt.is_collision:
        raise SpecError(f"{spec.kind} scenario never collides within {spec.duration} frames", "objects")
    if spec.kind == "parallel_near_miss" and gt.is_collision:
        raise SpecError(
            f"parallel_near_miss scenario collides at frame {gt.collision_frame} ({gt.pair[0]}, {gt.pair[1]})",
            "objects",
        )


def _observations(spec: ScenarioSpec) -> Frames:
    rng = np.random.default_rng(spec.seed)
    objects = sorted(spec.objects, key=lambda o: o.object_id)
    states: List[ObjectState] = []
    for frame in range(1, spec.duration + 1):
        for o in objects:
            if frame < o.start_frame:
                continue
            cx, cy = o.center(frame)
            if spec.noise_sigma > 0:
                nx, ny = rng.normal(0.0, spec.noise_sigma, size=2)
                cx, cy = cx + float(nx), cy + float(ny)
            states.append(ObjectState(frame, o.object_id, o.class_label, BBox(cx, cy, o.size[0], o.size[1])))
    return group_by_frame(states)


def generate(spec: ScenarioSpec, P: int = 10, Q: int = 20) -> Tuple[Frames, GroundTruthEvent]:
    if spec.kind == "sudden_turn":
        return gen_sudden_turn(spec, P, Q)
    spec.validate(P, Q)
    gt = ground_truth(spec)
    _check_kind(spec, gt)
    return _observations(spec), gt


def gen_sudden_turn(spec: ScenarioSpec, P: int = 10, Q: int = 20) -> Tuple[Frames, GroundTruthEvent]:
    if spec.kind != "sudden_turn":
        raise SpecError(f"gen_sudden_turn needs kind sudden_turn, got {spec.kind!r}", "kind")
    spec.validate(P, Q)
    gt = ground_truth(spec)
    return _observations(spec), gt


# -- serialization ---------------------------------------------------------


def _pair_of_numbers(value, name: str) -> Tuple[float, float]:
    try:
        a, b = value
        a, b = float(a), float(b)
    except (TypeError, ValueError):
        raise SpecError(f"{name} must be a pair of numbers, got {value!r}", name) from None
    if not (math.isfinite(a) and math.isfinite(b)):
        raise SpecError(f"{name} must be finite, got {value!r}", name)
    return (a, b)


def spec_from_dict(d: dict) -> ScenarioSpec:
    if not isinstance(d, dict):
        raise SpecError("scenario spec must be an object")
    for key in ("kind", "objects"):
        if key not in d:
            raise SpecError(f"missing field {key!r}", key)
    objects = []
    for i, o in enumerate(d["objects"]):
        for key in ("start", "velocity"):
            if key not in o:
                raise SpecError(f"objects[{i}] missing field {key!r}", key)
        turn_v = o.get("turn_velocity")
        objects.append(
            SimObject(
                object_id=str(o.get("id", chr(ord("a") + i))),
                start=_pair_of_numbers(o["start"], "start"),
                velocity=_pair_of_numbers(o["velocity"], "velocity"),
                size=_pair_of_numbers(o.get("size", (20, 20)), "size"),
                class_label=normalize_class(o.get("class", "car")),
                start_frame=int(o.get("start_frame", 1)),
                turn_frame=None if o.get("turn_frame") is None else int(o["turn_frame"]),
                turn_velocity=None if turn_v is None else _pair_of_numbers(turn_v, "turn_velocity"),
            )
        )
    try:
        return ScenarioSpec(
            kind=str(d["kind"]),
            objects=tuple(objects),
            duration=int(d.get("duration", 120)),
            fps=float(d.get("fps", 30.0)),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            seed=int(d.get("seed", 0)),
            name=str(d.get("name", "")),
        )
    except (TypeError, ValueError) as exc:
        raise SpecError(f"bad scenario field: {exc}") from None


def spec_to_dict(spec: ScenarioSpec) -> dict:
    d = {
        "name": spec.name,
        "kind": spec.kind,
        "duration": spec.duration,
        "fps": spec.fps,
        "noise_sigma": spec.noise_sigma,
        "seed": spec.seed,
        "objects": [],
    }
    for o in spec.objects:
        od = {
            "id": o.object_id,
            "class": o.class_label,
            "start": list(o.start),
            "velocity": list(o.velocity),
            "size": list(o.size),
            "start_frame": o.start_frame,
        }
        if o.turn_frame is not None:
            od["turn_frame"] = o.turn_frame
            od["turn_velocity"] = list(o.turn_velocity)
        d["objects"].append(od)
    return d


def load_specs(path) -> List[ScenarioSpec]:
    """Read one scenario or ``{"scenes": [...]}`` from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: not valid JSON: {exc.msg}") from None
    if isinstance(data, dict) and "scenes" in data:
        return [spec_from_dict(d) for d in data["scenes"]]
    return [spec_from_dict(data)]


def write_scene(out_dir, name: str, frames: Frames, gt: GroundTruthEvent):
    """Write ``<name>.tracks.jsonl`` and the ``<name>.gt.json`` sidecar."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tracks = out / f"{name}.tracks.jsonl"
    with open(tracks, "w", encoding="utf-8", newline="\n") as fh:
        for _, states in frames:
            for s in states:
                fh.write(record_line(s) + "\n")
    sidecar = out / f"{name}.gt.json"
    with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(gt.to_dict(), indent=2) + "\n")
    return tracks, sidecar


def read_gt(path) -> GroundTruthEvent:
    with open(path, encoding="utf-8") as fh:
        return GroundTruthEvent.from_dict(json.load(fh))


# -- canned scenes ---------------------------------------------------------


def crossing(scale: float = 1.0, speed: float = 5.0, size: float = 20.0, duration: Optional[int] = None,
             classes=("car", "car"), noise_sigma: float = 0.0, seed: int = 0, name: str = "crossing",
             kind: str = "crossing") -> ScenarioSpec:
    """Two objects on perpendicular paths meeting near (100, 100) * scale.

    With the defaults the first overlap is at frame 17.
    """
    reach = 100.0 * scale
    if duration is None:
        duration = max(80, int(2 * reach / speed) + 10)
    return ScenarioSpec(
        kind=kind,
        objects=(
            SimObject("a", (0.0, reach), (speed, 0.0), (size, size), classes[0]),
            SimObject("b", (reach, 0.0), (0.0, speed), (size, size), classes[1]),
        ),
        duration=duration,
        noise_sigma=noise_sigma,
        seed=seed,
        name=name,
    )


def parallel_near_miss(separation: float = 60.0, size: float = 20.0, speed: float = 5.0, duration: int = 120,
                       offset: float = 0.0, noise_sigma: float = 0.0, seed: int = 0,
                       name: str = "near_miss") -> ScenarioSpec:
    """Two objects in adjacent lanes moving toward each other without touching."""
    return ScenarioSpec(
        kind="parallel_near_miss",
        objects=(
            SimObject("a", (0.0 + offset, 100.0), (speed, 0.0), (size, size), "car"),
            SimObject("b", (speed * duration + offset, 100.0 + separation), (-speed, 0.0), (size, size), "car"),
        ),
        duration=duration,
        noise_sigma=noise_sigma,
        seed=seed,
        name=name,
    )


def rear_end(gap: float = 150.0, lead_speed: float = 2.0, follow_speed: float = 6.0, duration: int = 120,
             noise_sigma: float = 0.0, seed: int = 0, name: str = "rear_end") -> ScenarioSpec:
    return ScenarioSpec(
        kind="rear_end",
        objects=(
            SimObject("a", (0.0, 200.0), (follow_speed, 0.0), (40.0, 20.0), "car"),
            SimObject("b", (gap, 200.0), (lead_speed, 0.0), (40.0, 20.0), "car"),
        ),
        duration=duration,
        noise_sigma=noise_sigma,
        seed=seed,
        name=name,
    )


def sudden_turn(turn_frame: int = 40, new_velocity=(0.0, 5.0), duration: int = 120, noise_sigma: float = 0.0,
                seed: int = 0, name: str = "sudden_turn") -> ScenarioSpec:
    """A car heading +x turns at ``turn_frame``; a parked bus sits below the turn point."""
    turn_x = 5.0 * (turn_frame - 1)
    return ScenarioSpec(
        kind="sudden_turn",
        objects=(
            SimObject("a", (0.0, 100.0), (5.0, 0.0), (20.0, 20.0), "car", turn_frame=turn_frame,
                      turn_velocity=tuple(new_velocity)),
            SimObject("p", (turn_x, 200.0), (0.0, 0.0), (40.0, 30.0), "bus"),
        ),
        duration=duration,
        noise_sigma=noise_sigma,
        seed=seed,
        name=name,
    )


def default_suite(seed: int = 0) -> List[ScenarioSpec]:
    """Eight scenes in the spirit of a small surveillance benchmark (V1..V8)."""
    return [
        crossing(scale=3.0, name="V1", seed=seed),
        crossing(scale=3.0, size=30.0, classes=("car", "bus"), noise_sigma=0.5, seed=seed + 1, name="V2"),
        rear_end(noise_sigma=0.5, seed=seed + 2, name="V3"),
        ScenarioSpec(
            kind="pedestrian_cross",
            objects=(
                SimObject("a", (0.0, 240.0), (6.0, 0.0), (40.0, 20.0), "car"),
                SimObject("b", (300.0, 150.0), (0.0, 1.5), (10.0, 24.0), "pedestrian"),
            ),
            duration=120,
            noise_sigma=0.3,
            seed=seed + 3,
            name="V4",
        ),
        crossing(scale=2.5, speed=4.0, noise_sigma=1.0, seed=seed + 4, name="V5"),
        sudden_turn(noise_sigma=0.5, seed=seed + 5, name="V6"),
        ScenarioSpec(
            kind="pedestrian_cross",
            objects=(
                SimObject("a", (400.0, 0.0), (0.0, 5.0), (24.0, 40.0), "car"),
                SimObject("b", (340.0, 300.0), (1.2, 0.0), (10.0, 24.0), "pedestrian"),
                SimObject("c", (0.0, 100.0), (5.0, 0.0), (40.0, 20.0), "car"),
            ),
            duration=120,
            noise_sigma=0.8,
            seed=seed + 6,
            name="V7",
        ),
        parallel_near_miss(separation=40.0, noise_sigma=1.5, seed=seed + 7, name="V8"),
    ]


def bouncing_traffic(n_objects: int = 10, duration: int = 9000, width: float = 1280.0, height: float = 720.0,
                     seed: int = 0) -> Frames:
    """Objects moving in straight lines that reflect off the image border.

    Meant for throughput runs: dense, long, with plenty of crossings.
    """
    rng = np.random.default_rng(seed)
    pos = rng.uniform((50, 50), (width - 50, height - 50), size=(n_objects, 2))
    vel = rng.uniform(-6, 6, size=(n_objects, 2))
    sizes = rng.uniform(15, 45, size=(n_objects, 2))
    labels = ["car", "bus", "pedestrian", "car", "other"]
    ids = [f"{i:02d}" for i in range(n_objects)]
    frames: Frames = []
    for frame in range(1, duration + 1):
        states = [
            ObjectState(frame, ids[i], labels[i % len(labels)], BBox(float(pos[i, 0]), float(pos[i, 1]),
                                                                     float(sizes[i, 0]), float(sizes[i, 1])))
            for i in range(n_objects)
        ]
        frames.append((frame, states))
        pos += vel
        for axis, limit in ((0, width), (1, height)):
            low = pos[:, axis] < 0
            high = pos[:, axis] > limit
            pos[low, axis] = -pos[low, axis]
            pos[high, axis] = 2 * limit - pos[high, axis]
            vel[low | high, axis] *= -1
    return frames
