"""Scenario configuration and the flat ``key = value`` config format.

Top-level keys name ScenarioConfig fields; sub-configs are addressed with a
dotted prefix (``trigger.``, ``implicit.``, ``etsi.``, ``phy.``, ``mac.``).
Keys may be written in snake_case or camelCase. ``#`` starts a comment.
Unknown keys and unparsable values are rejected with the offending key.
"""

from __future__ import annotations

import dataclasses
import re
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .channel import MacConfig, PhyConfig
from .core import BASE_VAM_BYTES, CLUSTER_VAM_BYTES
from .etsi import EtsiClusterConfig
from .implicit import ImplicitConfig
from .mobility import MAX_PEDESTRIAN_SPEED, MAX_VEHICLE_SPEED
from .triggers import TriggerConfig

SCHEMES = ("standalone", "etsiCluster", "implicitCluster")
LAYOUTS = ("sidewalks", "platoon")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ScenarioConfig:
    scheme: str = "standalone"
    segment_length: float = 2000.0
    pedestrian_density: float = 48.0  # per 100 m
    layout: str = "sidewalks"
    # platoon layout only
    pedestrian_count: int = 6
    pedestrian_speed: float = MAX_PEDESTRIAN_SPEED
    speed_spread: float = 0.05
    vehicle_density: float = 30.0  # per km per lane
    lanes: int = 2
    vehicle_speed: float = MAX_VEHICLE_SPEED
    cam_rate_hz: float = 10.0
    cam_bytes: int = 200
    base_vam_bytes: int = BASE_VAM_BYTES
    cluster_vam_bytes: int = CLUSTER_VAM_BYTES
    warmup_seconds: float = 100.0
    measure_seconds: float = 60.0
    repetitions: int = 5
    seed: int = 0
    lossless: bool = False
    # clustering schemes run standalone before this time
    clustering_start: float = 0.0
    # leaders disband (break-up or dropped offer) at this time
    disband_at: Optional[float] = None
    handler_radius: float = 50.0
    awareness_step: float = 1.0
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    implicit: ImplicitConfig = field(default_factory=ImplicitConfig)
    etsi: EtsiClusterConfig = field(default_factory=EtsiClusterConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    mac: MacConfig = field(default_factory=MacConfig)

    def __post_init__(self):
        checks = [
            ("scheme", self.scheme in SCHEMES, f"must be one of {', '.join(SCHEMES)}"),
            ("layout", self.layout in LAYOUTS, f"must be one of {', '.join(LAYOUTS)}"),
            ("measure_seconds", self.measure_seconds > 0, "must be > 0"),
            ("warmup_seconds", self.warmup_seconds >= 0, "must be >= 0"),
            ("repetitions", self.repetitions >= 1, "must be >= 1"),
            ("segment_length", self.segment_length > 0, "must be > 0"),
            ("pedestrian_density", self.pedestrian_density > 0, "must be > 0"),
            ("pedestrian_count", self.pedestrian_count >= 1, "must be >= 1"),
            ("pedestrian_speed", 0 < self.pedestrian_speed <= MAX_PEDESTRIAN_SPEED + 1e-9, "must lie in (0, 5 km/h]"),
            ("speed_spread", 0 <= self.speed_spread < 1, "must lie in [0, 1)"),
            ("vehicle_density", self.vehicle_density >= 0, "must be >= 0"),
            ("lanes", self.lanes >= 0, "must be >= 0"),
            ("vehicle_speed", 0 <= self.vehicle_speed <= MAX_VEHICLE_SPEED + 1e-9, "must lie in [0, 60 km/h]"),
            ("cam_rate_hz", 1 <= self.cam_rate_hz <= 10, "must lie in [1, 10]"),
            ("cam_bytes", self.cam_bytes > 0, "must be > 0"),
            ("base_vam_bytes", self.base_vam_bytes > 0, "must be > 0"),
            ("cluster_vam_bytes", self.cluster_vam_bytes > self.base_vam_bytes, "must exceed base_vam_bytes"),
            ("clustering_start", self.clustering_start >= 0, "must be >= 0"),
            ("handler_radius", self.handler_radius > 0, "must be > 0"),
            ("awareness_step", self.awareness_step > 0, "must be > 0"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(key, msg)

    @property
    def duration(self) -> float:
        return self.warmup_seconds + self.measure_seconds


_SUBCONFIGS = ("trigger", "implicit", "etsi", "phy", "mac")


def _snake(name: str) -> str:
    return re.sub(r"(?<=[a-z0-9])([A-Z])", r"_\1", name).lower()


def _convert(key: str, raw: str, tp):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if raw.lower() in ("none", "null", ""):
            return None
        return _convert(key, raw, args[0])
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {tp.__name__}") from None
    raise ConfigError(key, f"unsupported type {tp}")


def _fields(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls) if not f.name.startswith("_")}


def apply_overrides(base: ScenarioConfig, pairs: dict) -> ScenarioConfig:
    """Apply string-valued ``key -> value`` overrides to a config."""
    top = _fields(ScenarioConfig)
    top_updates: dict = {}
    sub_updates: dict = {name: {} for name in _SUBCONFIGS}
    for raw_key, raw in pairs.items():
        parts = raw_key.split(".")
        if len(parts) == 2 and parts[0] in _SUBCONFIGS:
            sub = parts[0]
            name = _snake(parts[1])
            sub_fields = _fields(type(getattr(base, sub)))
            if name not in sub_fields:
                raise ConfigError(raw_key, "unknown key")
            sub_updates[sub][name] = _convert(raw_key, raw, sub_fields[name])
        elif len(parts) == 1:
            name = _snake(raw_key)
            if name not in top or name in _SUBCONFIGS:
                raise ConfigError(raw_key, "unknown key")
            top_updates[name] = _convert(raw_key, raw, top[name])
        else:
            raise ConfigError(raw_key, "unknown key")
    for sub, upd in sub_updates.items():
        if upd:
            try:
                top_updates[sub] = dataclasses.replace(getattr(base, sub), **upd)
            except ValueError as e:
                raise ConfigError(sub, str(e)) from None
    return dataclasses.replace(base, **top_updates)


def parse_config(text: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    pairs: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        if key in pairs:
            raise ConfigError(key, "duplicate key")
        pairs[key] = value
    return apply_overrides(base or ScenarioConfig(), pairs)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ScenarioConfig) -> str:
    """Round-trippable text form."""
    lines = []
    for name in _fields(ScenarioConfig):
        value = getattr(cfg, name)
        if name in _SUBCONFIGS:
            for sub in _fields(type(value)):
                lines.append(f"{name}.{sub} = {getattr(value, sub)!r}")
        else:
            lines.append(f"{name} = {value if isinstance(value, str) else repr(value)}")
    return "\n".join(lines) + "\n"
