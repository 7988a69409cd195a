"""Prediction-versus-arrival residuals and the majority-above-mean gate."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Deque, Dict, Optional, Sequence, Tuple

from .trajectory import ObjectState, PredictedTrajectory


class GateUnavailable(ValueError):
    """The anomaly gate was asked about an object with no matured residuals."""


@dataclass(frozen=True)
class DeviationSet:
    object_id: str
    residuals: Tuple[float, ...]
    as_of_frame: int

    def __len__(self):
        return len(self.residuals)


class PredictionLedger:
    """Per-object predictions keyed by target frame, plus matured residuals.

    Each target frame keeps only the newest prediction covering it. When the
    actual observation for that frame arrives, the residual (center distance)
    is computed and the prediction is retired.
    """

    def __init__(self, Q: int):
        if Q < 1:
            raise ValueError(f"Q must be >= 1, got {Q}")
        self.Q = Q
        self.predictions: Dict[str, Dict[int, Tuple[float, float]]] = {}
        self.residuals: Dict[str, Deque[Tuple[int, float]]] = {}

    def record_prediction(self, traj: PredictedTrajectory) -> "PredictionLedger":
        slots = self.predictions.setdefault(traj.object_id, {})
        slots.update(zip(traj.frames, traj.centers))
        return self

    def compute_deviation(self, actual: ObjectState) -> Optional[float]:
        slots = self.predictions.get(actual.object_id)
        if not slots:
            return None
        predicted = slots.pop(actual.frame, None)
        if predicted is None:
            return None
        residual = math.hypot(predicted[0] - actual.box.cx, predicted[1] - actual.box.cy)
        history = self.residuals.get(actual.object_id)
        if history is None:
            history = self.residuals[actual.object_id] = deque(maxlen=self.Q)
        history.append((actual.frame, residual))
        return residual

    def collect_deviation_set(self, object_id: str, at_frame: int) -> DeviationSet:
        history = self.residuals.get(object_id, ())
        values = tuple(r for f, r in history if f <= at_frame)[-self.Q :]
        return DeviationSet(object_id, values, at_frame)

    def evict(self, current_frame: int):
        """Drop predictions for target frames older than ``current_frame - Q``."""
        horizon = current_frame - self.Q
        for object_id in list(self.predictions):
            slots = self.predictions[object_id]
            for frame in [f for f in slots if f < horizon]:
                del slots[frame]
            if not slots:
                del self.predictions[object_id]

    def forget(self, object_id: str):
        self.predictions.pop(object_id, None)
        self.residuals.pop(object_id, None)


def anomaly_flag(dev) -> bool:
    """True iff a strict majority of residuals lie strictly above their mean.

    Accepts a :class:`DeviationSet` or a plain sequence of residuals.
    """
    residuals: Sequence[float] = dev.residuals if isinstance(dev, DeviationSet) else tuple(dev)
    n = len(residuals)
    if n == 0:
        raise GateUnavailable("no matured residuals to gate on")
    # r > mean  <=>  n*r > sum, evaluated exactly so equal residuals never compare above
    exact = [Fraction(r) for r in residuals]
    total = sum(exact)
    above = sum(1 for r in exact if n * r > total)
    return 2 * above > n
