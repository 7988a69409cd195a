"""Track file parsing, writing and gap repair.

Two line-oriented formats are supported:

``mot``
    MOT-Challenge CSV rows ``frame,id,x,y,w,h,conf,a,b,c`` with a left/top
    box corner. Frames are kept as written (1-based files stay 1-based).
``records``
    One JSON object per line with keys ``frame, id, class, cx, cy, w, h``.
    Unknown keys are ignored.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import groupby
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .trajectory import BBox, ObjectState, normalize_class

FORMATS = ("mot", "records")
RECORD_KEYS = ("frame", "id", "class", "cx", "cy", "w", "h")
_KEY_SET = frozenset(RECORD_KEYS)

Frames = List[Tuple[int, List[ObjectState]]]


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, path=None):
        self.message = message
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


@dataclass(frozen=True)
class TrackRecord:
    """One parsed line. The box is kept in center form; MOT rows convert on load."""

    frame: int
    object_id: str
    class_label: str
    cx: float
    cy: float
    w: float
    h: float
    confidence: Optional[float] = None

    @property
    def x(self) -> float:
        return self.cx - self.w / 2

    @property
    def y(self) -> float:
        return self.cy - self.h / 2

    def to_state(self) -> ObjectState:
        return ObjectState(self.frame, self.object_id, self.class_label, BBox(self.cx, self.cy, self.w, self.h))


def _number(text: str, name: str, line: Optional[int]) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"field {name!r} is not numeric: {text!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"field {name!r} is not finite: {text!r}", line)
    return value


def _frame(value, line: Optional[int]) -> int:
    if isinstance(value, bool):
        raise ParseError(f"frame must be an integer, got {value!r}", line)
    number = _number(value, "frame", line) if isinstance(value, str) else value
    if not isinstance(number, (int, float)) or number != int(number):
        raise ParseError(f"frame must be an integer, got {value!r}", line)
    if number < 0:
        raise ParseError(f"frame must be >= 0, got {value!r}", line)
    return int(number)


def _object_id(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    if isinstance(value, str):
        try:
            f = float(value)
        except ValueError:
            return value
        if f.is_integer() and "." in value:
            return str(int(f))
    return str(value)


def _check_size(w: float, h: float, line: Optional[int]):
    if not (w > 0 and h > 0):
        raise ParseError(f"box size must be positive, got w={w} h={h}", line)


def parse_mot(line: str, lineno: Optional[int] = None) -> TrackRecord:
    fields = [f.strip() for f in line.strip().split(",")]
    if len(fields) not in (7, 10):
        raise ParseError(f"expected 10 comma-separated MOT fields, got {len(fields)}", lineno)
    frame = _frame(fields[0], lineno)
    _number(fields[1], "id", lineno)
    x, y, w, h = (_number(v, n, lineno) for v, n in zip(fields[2:6], ("x", "y", "w", "h")))
    conf = _number(fields[6], "conf", lineno)
    _check_size(w, h, lineno)
    return TrackRecord(frame, _object_id(fields[1]), "other", x + w / 2, y + h / 2, w, h, conf)


def parse_record_line(line: str, lineno: Optional[int] = None) -> TrackRecord:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not a JSON record: {exc.msg}", lineno) from None
    return record_from_json(data, lineno)


def _record_fields(data, lineno: Optional[int]):
    if not isinstance(data, dict):
        raise ParseError("record must be a JSON object", lineno)
    if not _KEY_SET <= data.keys():
        missing = next(k for k in RECORD_KEYS if k not in data)
        raise ParseError(f"missing key {missing!r}", lineno)
    frame = data["frame"]
    if frame.__class__ is not int or frame < 0:
        frame = _frame(frame, lineno)
    values = (data["cx"], data["cy"], data["w"], data["h"])
    for key, v in zip(("cx", "cy", "w", "h"), values):
        if v.__class__ is not float and v.__class__ is not int:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"field {key!r} is not numeric: {v!r}", lineno)
        if not math.isfinite(v):
            raise ParseError(f"field {key!r} is not finite: {v!r}", lineno)
    _check_size(values[2], values[3], lineno)
    return (frame, _object_id(data["id"]), normalize_class(data["class"])) + values


def record_from_json(data, lineno: Optional[int] = None) -> TrackRecord:
    return TrackRecord(*_record_fields(data, lineno), data.get("conf"))


def _decode_records(lines):
    """Decode all record lines with one JSON call; fall back per line to report the bad one."""
    try:
        return json.loads("[" + ",".join(line for _, line in lines) + "]")
    except json.JSONDecodeError:
        pass
    for lineno, line in lines:
        try:
            json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not a JSON record: {exc.msg}", lineno) from None
    # every line decodes alone but not joined, e.g. a line holding two values
    raise ParseError("not a JSON record", lines[0][0])


_PARSERS = {"mot": parse_mot, "records": parse_record_line}


def read_states(path, fmt: str = "records") -> List[ObjectState]:
    if fmt not in _PARSERS:
        raise ValueError(f"unknown track format {fmt!r}; expected one of {FORMATS}")
    with open(path, encoding="utf-8") as fh:
        lines = [(n, line) for n, line in enumerate(fh, start=1)
                 if line.strip() and not line.lstrip().startswith("#")]
    states = []
    lineno = None
    try:
        if fmt == "records":
            decoded = _decode_records(lines) if lines else []
            for (lineno, _), data in zip(lines, decoded):
                frame, oid, label, cx, cy, w, h = _record_fields(data, lineno)
                states.append(ObjectState(frame, oid, label, BBox(cx, cy, w, h)))
        else:
            for lineno, line in lines:
                states.append(parse_mot(line, lineno).to_state())
    except ParseError as exc:
        raise ParseError(exc.message, exc.line, path) from None
    except ValueError as exc:
        raise ParseError(str(exc), lineno, path) from None
    return states


def group_by_frame(states: Iterable[ObjectState]) -> Frames:
    """Order states by (frame, object_id) and bundle them per frame."""
    ordered = sorted(states, key=lambda s: (s.frame, s.object_id))
    return [(frame, list(group)) for frame, group in groupby(ordered, key=lambda s: s.frame)]


def load_stream(path, fmt: str = "records") -> Frames:
    return group_by_frame(read_states(path, fmt))


def format_number(value: float) -> str:
    if isinstance(value, int) or (isinstance(value, float) and value.is_integer() and abs(value) < 1e15):
        return str(int(value))
    return repr(float(value))


def mot_line(state: ObjectState, confidence: float = 1) -> str:
    b = state.box
    fields = [
        str(state.frame),
        state.object_id,
        format_number(b.cx - b.w / 2),
        format_number(b.cy - b.h / 2),
        format_number(b.w),
        format_number(b.h),
        format_number(confidence),
        "-1",
        "-1",
        "-1",
    ]
    return ",".join(fields)


def record_line(state: ObjectState) -> str:
    b = state.box
    return json.dumps(
        {
            "frame": state.frame,
            "id": state.object_id,
            "class": state.class_label,
            "cx": b.cx,
            "cy": b.cy,
            "w": b.w,
            "h": b.h,
        }
    )


def write_stream(path, frames: Sequence[Tuple[int, Sequence[ObjectState]]], fmt: str = "records"):
    if fmt not in FORMATS:
        raise ValueError(f"unknown track format {fmt!r}; expected one of {FORMATS}")
    to_line = mot_line if fmt == "mot" else record_line
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for _, states in frames:
            for s in states:
                fh.write(to_line(s) + "\n")


def interpolate_gaps(observations: Iterable[ObjectState], max_gap: int = 5) -> List[ObjectState]:
    """Fill short per-object gaps by linear interpolation of cx, cy, w, h.

    A gap is the number of missing frames between two consecutive
    observations of the same object. Gaps longer than ``max_gap`` are left
    open. The result is ordered by (frame, object_id).
    """
    tracks: Dict[str, List[ObjectState]] = defaultdict(list)
    for s in observations:
        tracks[s.object_id].append(s)

    out: List[ObjectState] = []
    for states in tracks.values():
        states.sort(key=lambda s: s.frame)
        for prev, nxt in zip(states, states[1:]):
            out.append(prev)
            span = nxt.frame - prev.frame
            if span < 2 or span - 1 > max_gap:
                continue
            a, b = prev.box, nxt.box
            for step in range(1, span):
                t = step / span
                box = BBox(
                    a.cx + (b.cx - a.cx) * t,
                    a.cy + (b.cy - a.cy) * t,
                    a.w + (b.w - a.w) * t,
                    a.h + (b.h - a.h) * t,
                )
                out.append(ObjectState(prev.frame + step, prev.object_id, prev.class_label, box))
        out.append(states[-1])
    out.sort(key=lambda s: (s.frame, s.object_id))
    return out
