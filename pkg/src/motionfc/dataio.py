"""Line-oriented scenario / prediction files and the synthetic scenario generator.

Scenario record (one per line)::

    scenario_id|focal_id|H,T|TRACK;TRACK;...|LANE;LANE;...
    TRACK = agent_id,object_type,x y heading vx vy valid ...   (H+T groups)
    LANE  = lane_id,x y x y ...

Prediction record (one per line)::

    scenario_id|p_1 ... p_K|x y x y ...   (K*T points, world frame)

Floats are written with 9 significant digits in positional notation, which
round-trips float32 values exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvariantViolation, ParseError
from .geometry import normalize_angle
from .mapping import Lane, VectorMap
from .scenario import OBJECT_TYPES, STATE_DIM, AgentTrack, Scenario, make_states

_RESERVED = set("|;, \t\r\n")


def format_float(v) -> str:
    f = float(np.float32(v))
    text = "%.9g" % f
    if "e" in text or "inf" in text or "nan" in text:
        if not math.isfinite(f):
            raise ValueError(f"cannot serialize non-finite value {f}")
        text = np.format_float_positional(np.float32(f), precision=9, unique=False, fractional=False, trim="-")
    return text


def _format_floats(values: Iterable) -> str:
    return " ".join(format_float(v) for v in values)


def _check_id(kind: str, ident: str) -> None:
    if not ident or _RESERVED & set(ident):
        raise ValueError(f"{kind} {ident!r} is empty or contains a reserved separator")


def write_scenario(s: Scenario) -> str:
    """Serialize ``s`` to a single line (no trailing newline)."""
    _check_id("scenario id", s.scenario_id)
    tracks = []
    for tr in s.tracks:
        _check_id("agent id", tr.agent_id)
        nums = []
        for row in tr.states:
            nums.append(_format_floats(row[:5]))
            nums.append("1" if row[5] > 0.5 else "0")
        tracks.append(f"{tr.agent_id},{tr.object_type},{' '.join(nums)}")
    lanes = []
    for lane in s.map.lanes:
        _check_id("lane id", lane.lane_id)
        lanes.append(f"{lane.lane_id},{_format_floats(np.asarray(lane.points).ravel())}")
    return "|".join([s.scenario_id, s.focal_agent_id, f"{s.H},{s.T}", ";".join(tracks), ";".join(lanes)])


def _floats(text: str, line: int | None, field: str) -> np.ndarray:
    try:
        vals = np.array([float(tok) for tok in text.split()], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"bad number ({exc})", line, field) from None
    if not np.all(np.isfinite(vals)) or np.any(np.abs(vals) > np.finfo(np.float32).max):
        raise ParseError("non-finite or out-of-range number", line, field)
    return vals.astype(np.float32)


def parse_scenario(text: str, line: int | None = None) -> Scenario:
    """Parse and fully validate one scenario record."""
    parts = text.rstrip("\r\n").split("|")
    if len(parts) != 5:
        raise ParseError(f"expected 5 '|'-separated fields, got {len(parts)}", line, "record")
    sid, focal, horizon, tracks_txt, lanes_txt = parts
    try:
        H, T = (int(v) for v in horizon.split(","))
    except ValueError:
        raise ParseError(f"bad horizon {horizon!r}", line, "H,T") from None
    tracks = []
    for k, chunk in enumerate(tracks_txt.split(";") if tracks_txt else []):
        fields = chunk.split(",", 2)
        if len(fields) != 3:
            raise ParseError("track needs agent_id,object_type,states", line, f"track[{k}]")
        aid, otype, nums = fields
        vals = _floats(nums, line, f"track[{k}].states")
        if len(vals) % STATE_DIM:
            raise ParseError(f"{len(vals)} state values is not a multiple of {STATE_DIM}", line,
                             f"track[{k}].states")
        tracks.append(AgentTrack(aid, otype, vals.reshape(-1, STATE_DIM)))
    lanes = []
    for k, chunk in enumerate(lanes_txt.split(";") if lanes_txt else []):
        lid, sep, nums = chunk.partition(",")
        if not sep:
            raise ParseError("lane needs lane_id,points", line, f"lane[{k}]")
        vals = _floats(nums, line, f"lane[{k}].points")
        if len(vals) % 2:
            raise ParseError("odd number of lane coordinates", line, f"lane[{k}].points")
        lanes.append(Lane(lid, vals.reshape(-1, 2)))
    s = Scenario(sid, focal, tuple(tracks), VectorMap(tuple(lanes)), H, T)
    s.validate()
    return s


def write_scenarios(scenarios: Iterable[Scenario], path) -> int:
    lines = [write_scenario(s) + "\n" for s in scenarios]
    Path(path).write_text("".join(lines), encoding="utf-8")
    return len(lines)


def read_scenarios(path) -> list[Scenario]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, 1):
            if text.strip():
                out.append(parse_scenario(text, lineno))
    return out


# predictions ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Prediction:
    scenario_id: str
    probabilities: np.ndarray  # (K,)
    trajectories: np.ndarray   # (K, T, 2), world frame

    def __eq__(self, other):
        if not isinstance(other, Prediction):
            return NotImplemented
        return (self.scenario_id == other.scenario_id
                and np.array_equal(self.probabilities, other.probabilities)
                and np.array_equal(self.trajectories, other.trajectories))


def write_prediction(p: Prediction) -> str:
    _check_id("scenario id", p.scenario_id)
    return f"{p.scenario_id}|{_format_floats(p.probabilities)}|{_format_floats(np.asarray(p.trajectories).ravel())}"


def parse_prediction(text: str, line: int | None = None) -> Prediction:
    parts = text.rstrip("\r\n").split("|")
    if len(parts) != 3:
        raise ParseError(f"expected 3 '|'-separated fields, got {len(parts)}", line, "record")
    sid, probs_txt, traj_txt = parts
    probs = _floats(probs_txt, line, "probabilities")
    coords = _floats(traj_txt, line, "trajectories")
    K = len(probs)
    if K == 0:
        raise ParseError("no probabilities", line, "probabilities")
    if len(coords) == 0 or len(coords) % (2 * K):
        raise ParseError(f"{len(coords)} coordinates do not split into {K} trajectories", line, "trajectories")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise InvariantViolation("probabilities", f"scenario {sid!r} has negative or non-finite probabilities")
    return Prediction(sid, probs, coords.reshape(K, -1, 2))


def write_predictions(preds: Iterable[Prediction], path) -> int:
    lines = [write_prediction(p) + "\n" for p in preds]
    Path(path).write_text("".join(lines), encoding="utf-8")
    return len(lines)


def read_predictions(path) -> list[Prediction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, 1):
            if text.strip():
                out.append(parse_prediction(text, lineno))
    return out


# synthetic generator --------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    n_scenarios: int = 32
    min_agents: int = 2
    max_agents: int = 8
    min_lanes: int = 1
    max_lanes: int = 3
    weight_vehicle: float = 6.0
    weight_pedestrian: float = 1.0
    weight_motorcyclist: float = 1.0
    weight_cyclist: float = 1.0
    weight_bus: float = 1.0
    weight_straight: float = 1.0
    weight_arc: float = 1.0
    weight_junction: float = 2.0
    position_noise: float = 0.05
    heading_noise: float = 0.01
    velocity_noise: float = 0.05
    accel_noise: float = 0.2
    static_prob: float = 0.1
    missing_prob: float = 0.2
    H: int = 15
    T: int = 60
    seed: int = 0

    def __post_init__(self):
        from .errors import ConfigError

        if self.n_scenarios < 0:
            raise ConfigError("n_scenarios", "must be >= 0")
        if not 1 <= self.min_agents <= self.max_agents:
            raise ConfigError("min_agents", "need 1 <= min_agents <= max_agents")
        if not 1 <= self.min_lanes <= self.max_lanes:
            raise ConfigError("min_lanes", "need 1 <= min_lanes <= max_lanes")
        groups = ([f"weight_{t}" for t in OBJECT_TYPES], ["weight_straight", "weight_arc", "weight_junction"])
        for names in groups:
            for name in names:
                if getattr(self, name) < 0:
                    raise ConfigError(name, "weights must be non-negative")
            if sum(getattr(self, name) for name in names) <= 0:
                raise ConfigError(names[0], "weights in this group must have a positive sum")
        for name in ("position_noise", "heading_noise", "velocity_noise", "accel_noise"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        for name in ("static_prob", "missing_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(name, "must lie in [0, 1]")
        if self.H < 2 or self.T < 1:
            raise ConfigError("H", "need H >= 2 and T >= 1")

    @property
    def type_weights(self) -> tuple[float, ...]:
        return tuple(getattr(self, f"weight_{t}") for t in OBJECT_TYPES)

    @property
    def layout_weights(self) -> tuple[float, float, float]:
        return self.weight_straight, self.weight_arc, self.weight_junction


SPEED_RANGE = {
    "vehicle": (4.0, 14.0),
    "bus": (3.0, 10.0),
    "motorcyclist": (5.0, 15.0),
    "cyclist": (2.0, 6.0),
    "pedestrian": (0.8, 1.8),
}
LANE_WIDTH = 3.5
POINT_SPACING = 2.0


def _straight(p0, heading: float, length: float) -> np.ndarray:
    n = max(2, int(round(length / POINT_SPACING)) + 1)
    s = np.linspace(0.0, length, n)
    return np.stack([p0[0] + s * math.cos(heading), p0[1] + s * math.sin(heading)], axis=1)


def _arc(p0, heading: float, radius: float, sweep: float) -> np.ndarray:
    """Arc starting at ``p0`` tangent to ``heading``; positive sweep turns left."""
    side = 1.0 if sweep > 0 else -1.0
    cx = p0[0] - side * radius * math.sin(heading)
    cy = p0[1] + side * radius * math.cos(heading)
    n = max(2, int(round(abs(sweep) * radius / POINT_SPACING)) + 1)
    ang0 = heading - side * math.pi / 2
    a = ang0 + np.linspace(0.0, sweep, n)
    return np.stack([cx + radius * np.cos(a), cy + radius * np.sin(a)], axis=1)


def _chain(*pieces: np.ndarray) -> np.ndarray:
    out = [pieces[0]]
    for p in pieces[1:]:
        out.append(p[1:])
    return np.concatenate(out, axis=0)


def _end_heading(pts: np.ndarray) -> float:
    d = pts[-1] - pts[-2]
    return math.atan2(d[1], d[0])


def _layout(rng: np.random.Generator, kind: str, n_lanes: int):
    """Lane polylines plus routes (tuples of lane indices) for one layout."""
    lanes: list[np.ndarray] = []
    routes: list[tuple[int, ...]] = []
    focal_routes: list[tuple[int, ...]] = []
    if kind == "straight":
        for k in range(n_lanes):
            lanes.append(_straight((-120.0, k * LANE_WIDTH), 0.0, 320.0))
            routes.append((k,))
        lanes.append(_straight((200.0, -LANE_WIDTH), math.pi, 320.0))
        routes.append((n_lanes,))
        focal_routes = routes[:n_lanes]
    elif kind == "arc":
        radius = rng.uniform(25.0, 60.0)
        sweep = rng.uniform(math.radians(30), math.radians(90)) * rng.choice([-1.0, 1.0])
        for k in range(n_lanes):
            off = k * LANE_WIDTH
            r = radius - math.copysign(off, sweep)
            a = _straight((-100.0, off), 0.0, 100.0)
            b = _arc(a[-1], 0.0, r, sweep)
            c = _straight(b[-1], _end_heading(b), 150.0)
            lanes.append(_chain(a, b, c))
            routes.append((k,))
        focal_routes = list(routes)
    else:  # junction: approach lanes feeding left/right (and maybe straight) branches
        straight = rng.random() < 0.5
        radius = rng.uniform(12.0, 20.0)
        approach = _straight((-140.0, 0.0), 0.0, 140.0)
        lanes.append(approach)
        branches = []
        left = _chain(_arc(approach[-1], 0.0, radius, math.pi / 2), _straight((radius, radius), math.pi / 2, 120.0))
        lanes.append(left)
        branches.append(len(lanes) - 1)
        right = _chain(_arc(approach[-1], 0.0, radius, -math.pi / 2),
                       _straight((radius, -radius), -math.pi / 2, 120.0))
        lanes.append(right)
        branches.append(len(lanes) - 1)
        if straight:
            lanes.append(_straight(approach[-1], 0.0, 150.0))
            branches.append(len(lanes) - 1)
        for b in branches:
            routes.append((0, b))
        focal_routes = list(routes)
        # cross traffic on the perpendicular road
        lanes.append(_straight((radius + LANE_WIDTH, -140.0), math.pi / 2, 280.0))
        routes.append((len(lanes) - 1,))
    return lanes, routes, focal_routes


def _route_polyline(lanes, route) -> np.ndarray:
    return _chain(*[lanes[i] for i in route])


def _sample_along(poly: np.ndarray, s: np.ndarray):
    """Positions and tangent headings at arc lengths ``s`` (clamped)."""
    seg = np.diff(poly, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = np.clip(s, 0.0, cum[-1])
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / seg_len[idx]
    pos = poly[idx] + frac[:, None] * seg[idx]
    heading = np.arctan2(seg[idx, 1], seg[idx, 0])
    return pos, heading, cum[-1]


def _agent_motion(rng, cfg: SynthConfig, poly: np.ndarray, object_type: str, focal: bool, junction_at: float | None):
    n = cfg.H + cfg.T
    t = np.arange(n) * 0.1
    lo, hi = SPEED_RANGE[object_type]
    static = rng.random() < cfg.static_prob
    v0 = 0.0 if static else rng.uniform(lo, hi)
    accel = 0.0 if static else rng.normal(0.0, cfg.accel_noise)
    duration = t[-1]
    if v0 + accel * duration < 0:
        accel = -v0 / duration
    travel = v0 * duration + 0.5 * accel * duration ** 2
    total = _sample_along(poly, np.zeros(1))[2]
    t_ref = t[cfg.H - 1]
    if focal and junction_at is not None and travel > 1.0:
        # cross the junction somewhere in the future horizon
        s_ref = junction_at - rng.uniform(0.15, 0.6) * (travel - (v0 * t_ref + 0.5 * accel * t_ref ** 2))
        s0 = s_ref - (v0 * t_ref + 0.5 * accel * t_ref ** 2)
    else:
        s0 = rng.uniform(0.0, max(total - travel, 0.0) * (1.0 if focal else 1.2))
    s0 = max(s0, 0.0)
    s = s0 + v0 * t + 0.5 * accel * t ** 2
    pos, heading, total = _sample_along(poly, s)
    speed = v0 + accel * t
    vel = speed[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=1)
    valid = s <= total
    pos = pos + rng.normal(0.0, cfg.position_noise, size=pos.shape) if cfg.position_noise else pos
    heading = heading + rng.normal(0.0, cfg.heading_noise, size=n) if cfg.heading_noise else heading
    vel = vel + rng.normal(0.0, cfg.velocity_noise, size=vel.shape) if cfg.velocity_noise else vel
    if not focal and rng.random() < cfg.missing_prob:
        valid[: rng.integers(1, cfg.H)] = False
    return pos, normalize_angle(heading), vel, valid


def _transform(points: np.ndarray, theta: float, offset) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return points @ np.array([[c, s], [-s, c]]) + np.asarray(offset)


def generate_scenario(cfg: SynthConfig, index: int) -> Scenario:
    rng = np.random.default_rng([cfg.seed, index])
    kinds = ("straight", "arc", "junction")
    lw = np.asarray(cfg.layout_weights, dtype=float)
    kind = kinds[rng.choice(3, p=lw / lw.sum())]
    n_lanes = int(rng.integers(cfg.min_lanes, cfg.max_lanes + 1))
    lanes, routes, focal_routes = _layout(rng, kind, n_lanes)
    theta = rng.uniform(-math.pi, math.pi)
    offset = rng.uniform(-500.0, 500.0, size=2)
    tw = np.asarray(cfg.type_weights, dtype=float)
    n_agents = int(rng.integers(cfg.min_agents, cfg.max_agents + 1))
    tracks = []
    for a in range(n_agents):
        focal = a == 0
        otype = OBJECT_TYPES[rng.choice(len(OBJECT_TYPES), p=tw / tw.sum())]
        pool = focal_routes if focal else routes
        route = pool[int(rng.integers(len(pool)))]
        poly = _route_polyline(lanes, route)
        junction_at = None
        if kind == "junction" and len(route) > 1:
            junction_at = float(np.sum(np.linalg.norm(np.diff(lanes[route[0]], axis=0), axis=1)))
        pos, heading, vel, valid = _agent_motion(rng, cfg, poly, otype, focal, junction_at)
        pos = _transform(pos, theta, offset)
        vel = _transform(vel, theta, (0.0, 0.0))
        states = make_states(pos, heading + theta, vel, valid)
        tracks.append(AgentTrack(f"a{a}", otype, states))
    vmap = VectorMap(tuple(
        Lane(f"l{k}", _dedupe(_transform(p, theta, offset).astype(np.float32))) for k, p in enumerate(lanes)))
    return Scenario(f"s{cfg.seed}-{index:05d}", "a0", tuple(tracks), vmap, cfg.H, cfg.T)


def _dedupe(pts: np.ndarray) -> np.ndarray:
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    return pts[keep]


def generate_synthetic(cfg: SynthConfig) -> list[Scenario]:
    """Seeded synthetic scenarios; output is a pure function of ``cfg``."""
    return [generate_scenario(cfg, i) for i in range(cfg.n_scenarios)]
