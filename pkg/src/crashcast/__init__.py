"""Streaming collision forecasting from per-frame object tracks."""

__version__ = "0.1.0"

from .collision import (
    AlertDeduplicator,
    CollisionAlert,
    CollisionEngine,
    EngineConfig,
    boxes_overlap,
    dedup,
    pair_intersection,
)
from .deviation import DeviationSet, GateUnavailable, PredictionLedger, anomaly_flag
from .ingest import ParseError, TrackRecord, interpolate_gaps, load_stream, parse_mot, parse_record_line, write_stream
from .predictor import ConfigError, HorizonUnavailable, PredictorSpec, make_predictor, predict
from .trajectory import (
    BBox,
    Mobility,
    ObjectState,
    OrderingError,
    PredictedTrajectory,
    SceneRegistry,
    TrackWindow,
    classify_mobility,
)
