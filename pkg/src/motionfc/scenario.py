"""Scenario data model and per-agent history / interaction features."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, MissingReferenceState, UnknownAgent
from .geometry import Pose2, normalize_angle, rotate_vectors, to_agent_frame
from .mapping import VectorMap

OBJECT_TYPES = ("vehicle", "pedestrian", "motorcyclist", "cyclist", "bus")
DEFAULT_H = 15
DEFAULT_T = 60
DT = 0.1

# state columns
X, Y, HEADING, VX, VY, VALID = range(6)
STATE_DIM = 6
HISTORY_DIM = 12
INTERACTION_DIM = 7


@dataclass(frozen=True)
class AgentState:
    pose: Pose2
    vx: float
    vy: float
    valid: bool


@dataclass(frozen=True, eq=False)
class AgentTrack:
    """One agent over ``H + T`` steps; ``states`` is ``(H+T, 6)``.

    Columns are ``x, y, heading, vx, vy, valid``. Invalid rows are all zero.
    """

    agent_id: str
    object_type: str
    states: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, AgentTrack):
            return NotImplemented
        return (
            self.agent_id == other.agent_id
            and self.object_type == other.object_type
            and self.states.shape == other.states.shape
            and np.array_equal(self.states, other.states)
        )

    def __len__(self):
        return len(self.states)

    def valid(self) -> np.ndarray:
        return self.states[:, VALID] > 0.5

    def state(self, t: int) -> AgentState:
        row = self.states[t]
        return AgentState(Pose2(float(row[X]), float(row[Y]), float(row[HEADING])),
                          float(row[VX]), float(row[VY]), bool(row[VALID] > 0.5))

    def pose(self, t: int) -> Pose2:
        row = self.states[t]
        return Pose2(float(row[X]), float(row[Y]), float(row[HEADING]))


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    focal_agent_id: str
    tracks: tuple[AgentTrack, ...]
    map: VectorMap = field(default_factory=VectorMap)
    H: int = DEFAULT_H
    T: int = DEFAULT_T

    def track(self, agent_id: str) -> AgentTrack:
        for tr in self.tracks:
            if tr.agent_id == agent_id:
                return tr
        raise UnknownAgent(agent_id)

    @property
    def focal(self) -> AgentTrack:
        return self.track(self.focal_agent_id)

    def focal_reference(self) -> Pose2:
        return self.focal.pose(self.H - 1)

    def focal_future(self) -> tuple[np.ndarray, np.ndarray]:
        """World-frame focal future positions ``(T, 2)`` and validity mask."""
        fut = self.focal.states[self.H:]
        return fut[:, X:Y + 1].astype(np.float64), fut[:, VALID] > 0.5

    def validate(self) -> None:
        """Raise InvariantViolation naming the first failed check."""
        if self.H < 1 or self.T < 1:
            raise InvariantViolation("horizon", f"H={self.H}, T={self.T}")
        ids = set()
        for tr in self.tracks:
            if tr.agent_id in ids:
                raise InvariantViolation("agent_id", f"duplicate agent id {tr.agent_id!r}")
            ids.add(tr.agent_id)
            if tr.object_type not in OBJECT_TYPES:
                raise InvariantViolation("object_type", f"{tr.object_type!r} for agent {tr.agent_id!r}")
            st = tr.states
            if st.ndim != 2 or st.shape[0] != self.H + self.T:
                raise InvariantViolation(
                    "states length", f"agent {tr.agent_id!r} has {st.shape[0]} states, expected {self.H + self.T}")
            if st.shape[1] != STATE_DIM:
                raise InvariantViolation("state width", f"agent {tr.agent_id!r}")
            if not np.all(np.isfinite(st)):
                raise InvariantViolation("finite states", f"agent {tr.agent_id!r}")
            flags = st[:, VALID]
            if not np.all((flags == 0) | (flags == 1)):
                raise InvariantViolation("valid flag", f"agent {tr.agent_id!r}")
            if np.any(st[flags == 0] != 0):
                raise InvariantViolation("invalid state sentinel", f"agent {tr.agent_id!r}")
            h = st[:, HEADING]
            pi = np.float32(math.pi) if st.dtype == np.float32 else math.pi
            if np.any(h > pi) or np.any(h < -pi):
                raise InvariantViolation("heading range", f"agent {tr.agent_id!r}")
        if self.focal_agent_id not in ids:
            raise InvariantViolation("focal_agent_id", f"{self.focal_agent_id!r} not among tracks")
        if not np.all(self.focal.valid()[: self.H]):
            raise InvariantViolation("focal history", "focal track must be valid over all H history steps")
        self.map.validate()


def make_states(xy, heading, vxy, valid=None, dtype=np.float32) -> np.ndarray:
    """Pack per-step arrays into a state matrix, zeroing invalid rows."""
    xy = np.asarray(xy, dtype=np.float64)
    n = len(xy)
    valid = np.ones(n, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    st = np.zeros((n, STATE_DIM), dtype=np.float64)
    st[:, X:Y + 1] = xy
    st[:, HEADING] = normalize_angle(np.asarray(heading, dtype=np.float64))
    st[:, VX:VY + 1] = np.asarray(vxy, dtype=np.float64)
    st[:, VALID] = valid
    st[~valid] = 0.0
    return st.astype(dtype)


def standardize_track(track: AgentTrack, H: int = DEFAULT_H) -> AgentTrack:
    """Re-express a track in its own frame at the last history step."""
    if not track.valid()[H - 1]:
        raise MissingReferenceState(f"agent {track.agent_id!r} is not observed at step {H - 1}")
    return transform_track(track, track.pose(H - 1))


def transform_track(track: AgentTrack, ref: Pose2) -> AgentTrack:
    st = np.asarray(track.states, dtype=np.float64)
    valid = st[:, VALID] > 0.5
    out = np.zeros_like(st)
    out[:, X:Y + 1] = to_agent_frame(st[:, X:Y + 1], ref)
    out[:, HEADING] = normalize_angle(st[:, HEADING] - ref.heading)
    out[:, VX:VY + 1] = rotate_vectors(st[:, VX:VY + 1], -ref.heading)
    out[:, VALID] = valid
    out[~valid] = 0.0
    return AgentTrack(track.agent_id, track.object_type, out)


def type_one_hot(object_type: str) -> np.ndarray:
    v = np.zeros(len(OBJECT_TYPES))
    v[OBJECT_TYPES.index(object_type)] = 1.0
    return v


def _history_rows(std: AgentTrack, H: int) -> np.ndarray:
    st = std.states[:H]
    valid = st[:, VALID] > 0.5
    rows = np.zeros((H, HISTORY_DIM))
    rows[:, 0:2] = st[:, X:Y + 1]
    rows[:, 2:4] = st[:, VX:VY + 1]
    rows[:, 4] = np.cos(st[:, HEADING])
    rows[:, 5] = np.sin(st[:, HEADING])
    rows[:, 6:11] = type_one_hot(std.object_type)
    rows[:, 11] = 1.0
    rows[~valid] = 0.0
    return rows


def build_history_features(s: Scenario, agent_id: str) -> np.ndarray:
    """History matrix ``(H, 12)`` in the agent's own frame.

    Columns: ``x, y, vx, vy, cos(heading), sin(heading)``, five type
    one-hot slots, valid flag.
    """
    return _history_rows(standardize_track(s.track(agent_id), s.H), s.H)


@dataclass(frozen=True)
class InteractionFeature:
    neighbor_ids: tuple[str, ...]
    distances: np.ndarray
    rows: np.ndarray  # (n_neighbors, H, 7)

    @property
    def n_neighbors(self) -> int:
        return len(self.neighbor_ids)


def build_interaction_features(
    s: Scenario, agent_id: str, max_neighbors: int = 32, radius: float = 50.0
) -> InteractionFeature:
    """Per-timestep neighbor states relative to ``agent_id``.

    Neighbors are agents observed at the last history step within ``radius``
    of the target, nearest first (ties by agent id). Each entry is
    ``[rel_x, rel_y, rel_vx, rel_vy, cos(rel_heading), sin(rel_heading), valid]``
    in the target's standardization frame.
    """
    H = s.H
    target = s.track(agent_id)
    ref = target.pose(H - 1)
    if not target.valid()[H - 1]:
        raise MissingReferenceState(f"agent {agent_id!r} is not observed at step {H - 1}")
    cands = []
    for tr in s.tracks:
        if tr.agent_id == agent_id or not tr.valid()[H - 1]:
            continue
        p = tr.states[H - 1]
        d = math.hypot(float(p[X]) - ref.x, float(p[Y]) - ref.y)
        if d <= radius:
            cands.append((d, tr.agent_id, tr))
    cands.sort(key=lambda c: (c[0], c[1]))
    cands = cands[:max_neighbors]

    tgt = transform_track(target, ref).states[:H]
    tvalid = tgt[:, VALID] > 0.5
    rows = np.zeros((len(cands), H, INTERACTION_DIM))
    for n, (_, _, tr) in enumerate(cands):
        nb = transform_track(tr, ref).states[:H]
        valid = tvalid & (nb[:, VALID] > 0.5)
        rel_h = normalize_angle(nb[:, HEADING] - tgt[:, HEADING])
        rows[n, :, 0:2] = nb[:, X:Y + 1] - tgt[:, X:Y + 1]
        rows[n, :, 2:4] = nb[:, VX:VY + 1] - tgt[:, VX:VY + 1]
        rows[n, :, 4] = np.cos(rel_h)
        rows[n, :, 5] = np.sin(rel_h)
        rows[n, :, 6] = 1.0
        rows[n, ~valid] = 0.0
    return InteractionFeature(
        tuple(c[1] for c in cands), np.array([c[0] for c in cands], dtype=np.float64), rows)
