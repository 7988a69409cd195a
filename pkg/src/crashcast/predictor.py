"""Deterministic short-horizon trajectory predictors.

Both predictors take the recent history of one object (a
:class:`~crashcast.trajectory.TrackWindow`) and emit ``Q`` future centers at
the frames right after the window's last observation. Box sizes are held at
the last observed (w, h).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .trajectory import PredictedTrajectory, TrackWindow

KINDS = ("constant_velocity", "least_squares")


class ConfigError(ValueError):
    """Invalid engine, predictor or scenario configuration."""


class HorizonUnavailable(ValueError):
    """The window is too short for the requested predictor."""


@dataclass(frozen=True)
class PredictorSpec:
    kind: str = "constant_velocity"
    k: int = 3
    degree: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown predictor kind {self.kind!r}; expected one of {KINDS}")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"predictor k must be an integer >= 1, got {self.k}")
        if self.degree not in (1, 2):
            raise ConfigError(f"predictor degree must be 1 or 2, got {self.degree}")

    @property
    def label(self) -> str:
        if self.kind == "constant_velocity":
            return f"constant_velocity(k={self.k})"
        return f"least_squares(d={self.degree})"

    def params(self) -> Dict[str, int]:
        if self.kind == "constant_velocity":
            return {"k": self.k}
        return {"degree": self.degree}


def parse_predictor(text: str) -> PredictorSpec:
    """Parse ``kind[:key=value,...]``, e.g. ``least_squares:degree=2``."""
    kind, _, rest = text.strip().partition(":")
    kwargs = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if key == "d":
            key = "degree"
        if not sep or key not in ("k", "degree"):
            raise ConfigError(f"bad predictor parameter {item!r} in {text!r}")
        try:
            kwargs[key] = int(value)
        except ValueError:
            raise ConfigError(f"predictor parameter {key} must be an integer, got {value!r}") from None
    return PredictorSpec(kind.strip(), **kwargs)


def _trajectory(window: TrackWindow, centers) -> PredictedTrajectory:
    last = window.states[-1]
    return PredictedTrajectory(last.object_id, last.frame, tuple(centers), last.box.w, last.box.h, last.class_label)


class ConstantVelocityPredictor:
    """Extrapolate with the mean of the last ``k`` per-frame displacements."""

    min_history = 2

    def __init__(self, spec: PredictorSpec):
        self.spec = spec

    def predict(self, window: TrackWindow, Q: int) -> PredictedTrajectory:
        n = len(window.states)
        if n < self.min_history:
            raise HorizonUnavailable(f"object {window.object_id!r}: need 2 states, have {n}")
        span = min(self.spec.k, n - 1)
        last = window.states[-1]
        ref = window.states[-1 - span]
        # the displacement sum telescopes; dividing by the frame span also copes with gaps
        frames = last.frame - ref.frame
        vx = (last.box.cx - ref.box.cx) / frames
        vy = (last.box.cy - ref.box.cy) / frames
        cx, cy = last.box.cx, last.box.cy
        return _trajectory(window, [(cx + vx * m, cy + vy * m) for m in range(1, Q + 1)])


class LeastSquaresPredictor:
    """Fit cx(t) and cy(t) independently with an ordinary least-squares polynomial."""

    def __init__(self, spec: PredictorSpec):
        self.spec = spec
        self.min_history = spec.degree + 1

    def predict(self, window: TrackWindow, Q: int) -> PredictedTrajectory:
        n = len(window.states)
        if n < self.min_history:
            raise HorizonUnavailable(
                f"object {window.object_id!r}: degree {self.spec.degree} fit needs {self.min_history} states, have {n}"
            )
        last = window.states[-1]
        # time and position relative to the newest sample keep the design matrix well conditioned
        t = np.array([s.frame - last.frame for s in window.states], dtype=float)
        xy = np.array([(s.box.cx - last.box.cx, s.box.cy - last.box.cy) for s in window.states])
        powers = np.arange(self.spec.degree + 1)
        design = t[:, None] ** powers
        coef, *_ = np.linalg.lstsq(design, xy, rcond=None)
        future = np.arange(1, Q + 1, dtype=float)[:, None] ** powers
        pred = future @ coef
        centers = [(last.box.cx + float(dx), last.box.cy + float(dy)) for dx, dy in pred]
        return _trajectory(window, centers)


_REGISTRY = {
    "constant_velocity": ConstantVelocityPredictor,
    "least_squares": LeastSquaresPredictor,
}


def make_predictor(spec):
    if isinstance(spec, str):
        spec = parse_predictor(spec)
    if not isinstance(spec, PredictorSpec):
        raise ConfigError(f"expected a PredictorSpec, got {type(spec).__name__}")
    return _REGISTRY[spec.kind](spec)


def predict(window: TrackWindow, Q: int, spec: PredictorSpec) -> PredictedTrajectory:
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    return make_predictor(spec).predict(window, Q)
