"""Model configuration and key=value text (de)serialization shared by configs."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .mapping import DEFAULT_RADII, MapQueryConfig


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}", f"expected key=value, got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def format_kv(items: dict[str, Any]) -> str:
    return "".join(f"{k}={v}\n" for k, v in items.items())


def _coerce(name: str, typ, raw: str):
    try:
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        if typ in (bool, "bool"):
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if typ in ("float | None", "Optional[float]"):
            return None if raw.lower() in ("", "none") else float(raw)
        if str(typ).startswith("tuple[float"):
            return tuple(float(v) for v in raw.split(","))
        return raw
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r} as {typ}") from None


def _render(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dataclass_from_kv(cls, items: dict[str, str]):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(key, f"unknown field for {cls.__name__}")
        kwargs[key] = _coerce(key, known[key].type, raw)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(_field_in_message(str(exc), known), str(exc)) from None


def _field_in_message(msg: str, known) -> str:
    for name in known:
        if name in msg:
            return name
    return "config"


def dataclass_to_kv(obj) -> dict[str, str]:
    return {f.name: _render(getattr(obj, f.name)) for f in fields(obj)}


def load_config(cls, path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("path", f"cannot read {path}: {exc}") from None
    return dataclass_from_kv(cls, parse_kv(text))


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 128
    n_heads: int = 4
    n_encoder_layers: int = 2
    N_anchors: int = 16
    K_modes: int = 6
    T: int = 60
    H: int = 15
    anchor_waypoint_stride: int = 10
    max_neighbors: int = 32
    neighbor_radius: float = 50.0
    p_max: int = 10
    max_segments: int = 64
    radius_vehicle: float = DEFAULT_RADII["vehicle"]
    radius_pedestrian: float = DEFAULT_RADII["pedestrian"]
    radius_motorcyclist: float = DEFAULT_RADII["motorcyclist"]
    radius_cyclist: float = DEFAULT_RADII["cyclist"]
    radius_bus: float = DEFAULT_RADII["bus"]

    def __post_init__(self):
        for name in ("d_model", "n_heads", "n_encoder_layers", "N_anchors", "K_modes", "T", "H",
                     "anchor_waypoint_stride", "max_neighbors", "max_segments"):
            if getattr(self, name) < (0 if name in ("n_encoder_layers", "max_neighbors") else 1):
                raise ConfigError(name, f"must be positive, got {getattr(self, name)}")
        if self.d_model % self.n_heads:
            raise ConfigError("n_heads", f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.K_modes > self.N_anchors:
            raise ConfigError("K_modes", f"K_modes={self.K_modes} exceeds N_anchors={self.N_anchors}")
        if self.T % self.anchor_waypoint_stride:
            raise ConfigError("anchor_waypoint_stride", f"T={self.T} not divisible by stride")
        if self.p_max < 2:
            raise ConfigError("p_max", "must be >= 2")
        for t in DEFAULT_RADII:
            if not getattr(self, f"radius_{t}") > 0:
                raise ConfigError(f"radius_{t}", "must be positive")

    @property
    def n_waypoints(self) -> int:
        return self.T // self.anchor_waypoint_stride

    def map_query(self) -> MapQueryConfig:
        return MapQueryConfig({t: getattr(self, f"radius_{t}") for t in DEFAULT_RADII}, self.max_segments)

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_kv(self) -> dict[str, str]:
        return dataclass_to_kv(self)

    @classmethod
    def from_kv(cls, items: dict[str, str]) -> "ModelConfig":
        return dataclass_from_kv(cls, items)


TINY_MODEL = ModelConfig(d_model=8, n_heads=2, n_encoder_layers=1, N_anchors=3, K_modes=2, T=6, H=4,
                         anchor_waypoint_stride=3, max_neighbors=3, max_segments=4, p_max=4)

__all__ = ["ModelConfig", "TINY_MODEL", "dataclass_from_kv", "dataclass_to_kv", "format_kv", "load_config",
           "parse_kv"]
