"""INI-style run configuration.

Sections and keys (all optional)::

    [engine]    P Q T fps gating overlap_margin dedup_cooldown eps_move min_obs
    [predictor] kind k degree
    [ingest]    format max_gap
    [eval]      lookahead        ; frames, defaults to 3 * fps
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from typing import Optional

from .collision import EngineConfig
from .predictor import ConfigError, PredictorSpec

_ENGINE_KEYS = {
    "p": ("P", int),
    "q": ("Q", int),
    "t": ("T", int),
    "fps": ("fps", float),
    "gating": ("gating", str),
    "overlap_margin": ("overlap_margin", float),
    "dedup_cooldown": ("dedup_cooldown", int),
    "eps_move": ("eps_move", float),
    "min_obs": ("min_obs", int),
}
_PREDICTOR_KEYS = {"kind": str, "k": int, "degree": int}
_INGEST_KEYS = {"format": str, "max_gap": int}
_EVAL_KEYS = {"lookahead": int}


@dataclass(frozen=True)
class RunSettings:
    engine: EngineConfig = field(default_factory=EngineConfig)
    format: str = "records"
    lookahead: Optional[int] = None

    def as_dict(self) -> dict:
        return {
            "engine": self.engine.as_dict(),
            "ingest": {"format": self.format, "max_gap": self.engine.max_gap},
            "eval": {"lookahead": self.effective_lookahead},
        }

    @property
    def effective_lookahead(self) -> int:
        return self.lookahead if self.lookahead is not None else int(round(3 * self.engine.fps))


def _convert(section: str, key: str, raw: str, kind):
    try:
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None


def parse_config_text(text: str, source: str = "<config>") -> RunSettings:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    known = {"engine", "predictor", "ingest", "eval"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")

    engine_kw, predictor_kw = {}, {}
    fmt, lookahead = "records", None
    if parser.has_section("engine"):
        for key, raw in parser.items("engine"):
            if key not in _ENGINE_KEYS:
                raise ConfigError(f"{source}: unknown key [engine] {key}")
            name, kind = _ENGINE_KEYS[key]
            engine_kw[name] = _convert("engine", key, raw, kind)
    if parser.has_section("predictor"):
        for key, raw in parser.items("predictor"):
            if key not in _PREDICTOR_KEYS:
                raise ConfigError(f"{source}: unknown key [predictor] {key}")
            predictor_kw[key] = _convert("predictor", key, raw, _PREDICTOR_KEYS[key])
    if parser.has_section("ingest"):
        for key, raw in parser.items("ingest"):
            if key not in _INGEST_KEYS:
                raise ConfigError(f"{source}: unknown key [ingest] {key}")
            value = _convert("ingest", key, raw, _INGEST_KEYS[key])
            if key == "format":
                fmt = value
            else:
                engine_kw["max_gap"] = value
    if parser.has_section("eval"):
        for key, raw in parser.items("eval"):
            if key not in _EVAL_KEYS:
                raise ConfigError(f"{source}: unknown key [eval] {key}")
            lookahead = _convert("eval", key, raw, int)
    if fmt not in ("mot", "records"):
        raise ConfigError(f"{source}: [ingest] format must be mot or records, got {fmt!r}")
    if lookahead is not None and lookahead < 0:
        raise ConfigError(f"{source}: [eval] lookahead must be >= 0, got {lookahead}")
    engine = EngineConfig(predictor=PredictorSpec(**predictor_kw), **engine_kw)
    return RunSettings(engine, fmt, lookahead)


def load_config(path=None) -> RunSettings:
    if path is None:
        return RunSettings()
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), str(path))


def with_overrides(settings: RunSettings, gating=None, predictor=None, fmt=None) -> RunSettings:
    engine = settings.engine
    if gating is not None:
        engine = replace(engine, gating=gating)
    if predictor is not None:
        engine = replace(engine, predictor=predictor)
    return replace(settings, engine=engine, format=fmt or settings.format)
