"""Domain types for per-object trajectories and the sliding-window registry.

Boxes live in pixel space as (cx, cy, w, h). A :class:`SceneRegistry` keeps
the last ``P`` observations of every object and decides, once enough
history has arrived, whether the object is moving or static.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Deque, Dict, Optional, Tuple

CLASS_LABELS = ("car", "bus", "pedestrian", "other")


def normalize_class(label) -> str:
    """Map a free-form class name onto the closed label set."""
    if label is None:
        return "other"
    label = str(label).strip().lower()
    return label if label in CLASS_LABELS else "other"


class OrderingError(ValueError):
    """An observation arrived with a frame older than one already seen."""


class Mobility(str, Enum):
    MOVING = "moving"
    STATIC = "static"
    UNDECIDED = "undecided"


@dataclass(frozen=True, slots=True)
class BBox:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise ValueError(f"box center must be finite, got ({self.cx}, {self.cy})")
        if not (self.w > 0 and self.h > 0) or not (math.isfinite(self.w) and math.isfinite(self.h)):
            raise ValueError(f"box size must be positive and finite, got w={self.w} h={self.h}")

    @property
    def center(self) -> Tuple[float, float]:
        return (self.cx, self.cy)

    def translated(self, dx: float, dy: float) -> "BBox":
        return BBox(self.cx + dx, self.cy + dy, self.w, self.h)


@dataclass(frozen=True, slots=True)
class ObjectState:
    frame: int
    object_id: str
    class_label: str
    box: BBox

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"frame must be non-negative, got {self.frame}")


@dataclass
class TrackWindow:
    """The last ``capacity`` observations of one object, oldest first."""

    object_id: str
    capacity: int
    states: Deque[ObjectState] = field(default_factory=deque)
    mobility: Mobility = Mobility.UNDECIDED

    def __post_init__(self):
        self.states = deque(self.states, maxlen=self.capacity)

    def __len__(self):
        return len(self.states)

    @property
    def last(self) -> Optional[ObjectState]:
        return self.states[-1] if self.states else None

    def append(self, obs: ObjectState):
        last = self.last
        if last is not None:
            if obs.frame < last.frame:
                raise OrderingError(
                    f"object {obs.object_id!r}: frame {obs.frame} arrived after frame {last.frame}"
                )
            if obs.frame == last.frame:
                self.states[-1] = obs
                return
        self.states.append(obs)


@dataclass(frozen=True)
class PredictedTrajectory:
    """``Q`` predicted centers for frames ``issued_at + 1 ... issued_at + Q``.

    Centers are stored compactly; :attr:`points` builds the full
    :class:`ObjectState` sequence on first access.
    """

    object_id: str
    issued_at: int
    centers: Tuple[Tuple[float, float], ...]
    w: float
    h: float
    class_label: str = "other"

    def __post_init__(self):
        if not self.centers:
            raise ValueError("a predicted trajectory needs at least one point")
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"predicted box size must be positive, got w={self.w} h={self.h}")

    @classmethod
    def from_points(cls, object_id: str, issued_at: int, points) -> "PredictedTrajectory":
        points = tuple(points)
        if not points:
            raise ValueError("a predicted trajectory needs at least one point")
        for offset, p in enumerate(points, start=1):
            if p.frame != issued_at + offset:
                raise ValueError(f"predicted point {offset} has frame {p.frame}, expected {issued_at + offset}")
        first = points[0]
        return cls(object_id, issued_at, tuple(p.box.center for p in points), first.box.w, first.box.h,
                   first.class_label)

    def __len__(self):
        return len(self.centers)

    @property
    def frames(self) -> range:
        return range(self.issued_at + 1, self.issued_at + 1 + len(self.centers))

    @cached_property
    def points(self) -> Tuple[ObjectState, ...]:
        return tuple(
            ObjectState(f, self.object_id, self.class_label, BBox(cx, cy, self.w, self.h))
            for f, (cx, cy) in zip(self.frames, self.centers)
        )


def classify_mobility(window: TrackWindow, min_obs: int = 5, eps_move: float = 3.0) -> Mobility:
    """Decide whether an object moves, from its center displacement.

    The decision is sticky: a window that is already classified keeps its
    label regardless of later observations.
    """
    if window.mobility is not Mobility.UNDECIDED:
        return window.mobility
    if len(window.states) < min_obs:
        return Mobility.UNDECIDED
    first = window.states[0].box
    max_disp = max(math.hypot(s.box.cx - first.cx, s.box.cy - first.cy) for s in window.states)
    return Mobility.STATIC if max_disp < eps_move else Mobility.MOVING


@dataclass
class SceneRegistry:
    """All track windows of one stream plus the fixed boxes of static objects.

    ``max_gap`` is the largest number of missing frames tolerated inside one
    window; a longer gap restarts the object's window (same id, fresh
    history, mobility undecided). ``None`` disables restarts.
    """

    P: int = 10
    Q: int = 20
    min_obs: int = 5
    eps_move: float = 3.0
    max_gap: Optional[int] = None
    windows: Dict[str, TrackWindow] = field(default_factory=dict)
    statics: Dict[str, BBox] = field(default_factory=dict)

    def __post_init__(self):
        if self.P < 2:
            raise ValueError(f"P must be >= 2, got {self.P}")
        if self.Q < 1:
            raise ValueError(f"Q must be >= 1, got {self.Q}")

    def push_observation(self, obs: ObjectState) -> "SceneRegistry":
        window = self.windows.get(obs.object_id)
        if window is None:
            window = self.windows[obs.object_id] = TrackWindow(obs.object_id, self.P)
        else:
            last = window.last
            if last is not None and obs.frame < last.frame:
                raise OrderingError(
                    f"object {obs.object_id!r}: frame {obs.frame} arrived after frame {last.frame}"
                )
            if self.max_gap is not None and last is not None and obs.frame - last.frame - 1 > self.max_gap:
                window = self.windows[obs.object_id] = TrackWindow(obs.object_id, self.P)
                self.statics.pop(obs.object_id, None)
        window.append(obs)
        if window.mobility is Mobility.UNDECIDED:
            window.mobility = classify_mobility(window, self.min_obs, self.eps_move)
            if window.mobility is Mobility.STATIC:
                self.statics[obs.object_id] = obs.box
        return self

    def moving(self):
        return [w for w in self.windows.values() if w.mobility is Mobility.MOVING]
