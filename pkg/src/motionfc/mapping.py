"""Lane-segment map preprocessing: splitting, radius queries, topology features."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateLane, InvariantViolation, UnknownObjectType
from .geometry import Pose2, to_agent_frame

DEFAULT_P_MAX = 10
DEFAULT_RADII = {
    "vehicle": 80.0,
    "bus": 100.0,
    "motorcyclist": 60.0,
    "cyclist": 50.0,
    "pedestrian": 30.0,
}
LANE_FEATURE_DIM = 5


@dataclass(frozen=True, eq=False)
class Lane:
    lane_id: str
    points: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Lane):
            return NotImplemented
        return self.lane_id == other.lane_id and np.array_equal(self.points, other.points)


@dataclass(frozen=True)
class VectorMap:
    lanes: tuple[Lane, ...] = ()

    def validate(self) -> None:
        seen = set()
        for lane in self.lanes:
            if lane.lane_id in seen:
                raise InvariantViolation("lane_id", f"duplicate lane id {lane.lane_id!r}")
            seen.add(lane.lane_id)
            pts = np.asarray(lane.points)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise InvariantViolation("lane points", f"lane {lane.lane_id!r} needs >= 2 points")
            if not np.all(np.isfinite(pts)):
                raise InvariantViolation("lane points", f"lane {lane.lane_id!r} has non-finite values")
            if np.any(np.all(pts[1:] == pts[:-1], axis=1)):
                raise InvariantViolation("lane points", f"lane {lane.lane_id!r} repeats a point")


@dataclass(frozen=True, eq=False)
class LaneSegment:
    segment_id: str
    points: np.ndarray
    source_lane_id: str

    def __eq__(self, other):
        if not isinstance(other, LaneSegment):
            return NotImplemented
        return (
            self.segment_id == other.segment_id
            and self.source_lane_id == other.source_lane_id
            and np.array_equal(self.points, other.points)
        )

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


@dataclass(frozen=True)
class MapQueryConfig:
    radius_by_type: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_RADII))
    max_segments: int = 64

    def __post_init__(self):
        for t, r in self.radius_by_type.items():
            if not r > 0:
                raise ValueError(f"radius for {t!r} must be positive, got {r}")
        if self.max_segments < 1:
            raise ValueError("max_segments must be >= 1")

    def radius(self, object_type: str) -> float:
        try:
            return float(self.radius_by_type[object_type])
        except KeyError:
            raise UnknownObjectType(object_type) from None


def split_map(vmap: VectorMap, p_max: int = DEFAULT_P_MAX) -> list[LaneSegment]:
    """Chop every lane into chunks of at most ``p_max`` points.

    Adjacent chunks share their boundary point, so dropping the duplicated
    boundaries and concatenating gives back the lane.
    """
    if p_max < 2:
        raise ValueError("p_max must be >= 2")
    segments = []
    for lane in vmap.lanes:
        pts = np.asarray(lane.points)
        n = len(pts)
        if n < 2:
            raise DegenerateLane(f"lane {lane.lane_id!r} has {n} point(s)")
        start, k = 0, 0
        while True:
            end = min(start + p_max, n)
            segments.append(LaneSegment(f"{lane.lane_id}:{k}", pts[start:end].copy(), lane.lane_id))
            if end == n:
                break
            start, k = end - 1, k + 1
    return segments


def point_polyline_distance(p, pts: np.ndarray) -> float:
    """Minimum Euclidean distance from point ``p`` to the polyline ``pts``."""
    p = np.asarray(p, dtype=np.float64)
    a = np.asarray(pts[:-1], dtype=np.float64)
    b = np.asarray(pts[1:], dtype=np.float64)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.sqrt(np.min(np.sum((closest - p) ** 2, axis=1))))


class SegmentIndex:
    """Uniform-grid index over segment bounding boxes. Immutable once built."""

    def __init__(self, segments: Sequence[LaneSegment], cell_size: float = 25.0):
        self.segments = tuple(segments)
        self.cell_size = float(cell_size)
        cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        for idx, seg in enumerate(self.segments):
            x0, y0, x1, y1 = seg.bounds
            for i in range(self._cell(x0), self._cell(x1) + 1):
                for j in range(self._cell(y0), self._cell(y1) + 1):
                    cells[(i, j)].append(idx)
        self._cells = dict(cells)

    def _cell(self, v: float) -> int:
        return math.floor(v / self.cell_size)

    def query_box(self, x0: float, y0: float, x1: float, y1: float) -> list[LaneSegment]:
        """Segments whose bounding box intersects the closed box."""
        found = set()
        for i in range(self._cell(x0), self._cell(x1) + 1):
            for j in range(self._cell(y0), self._cell(y1) + 1):
                found.update(self._cells.get((i, j), ()))
        out = []
        for idx in sorted(found):
            bx0, by0, bx1, by1 = self.segments[idx].bounds
            if bx0 <= x1 and bx1 >= x0 and by0 <= y1 and by1 >= y0:
                out.append(self.segments[idx])
        return out

    def query_disc(self, center, radius: float) -> list[tuple[float, LaneSegment]]:
        """(distance, segment) pairs within ``radius``, nearest first, ties by id."""
        cx, cy = float(center[0]), float(center[1])
        hits = []
        for seg in self.query_box(cx - radius, cy - radius, cx + radius, cy + radius):
            d = point_polyline_distance((cx, cy), seg.points)
            if d <= radius:
                hits.append((d, seg))
        hits.sort(key=lambda h: (h[0], h[1].segment_id))
        return hits


def build_index(segments: Sequence[LaneSegment], cell_size: float = 25.0) -> SegmentIndex:
    return SegmentIndex(segments, cell_size)


def query_segments(
    index: SegmentIndex,
    position,
    object_type: str,
    cfg: MapQueryConfig,
    limit: int | None = None,
) -> list[LaneSegment]:
    """Segments within the type-specific radius of ``position``, nearest first."""
    radius = cfg.radius(object_type)
    hits = index.query_disc(position, radius)
    if limit is not None:
        hits = hits[:limit]
    return [seg for _, seg in hits]


def lane_features(segments: Sequence[LaneSegment], agent_pose: Pose2, p_max: int = DEFAULT_P_MAX) -> np.ndarray:
    """Agent-frame topology features, shape ``(n_segments, p_max, 5)``.

    Row layout is ``[x, y, dir_cos, dir_sin, valid]``; padding rows are zero.
    """
    out = np.zeros((len(segments), p_max, LANE_FEATURE_DIM), dtype=np.float64)
    for s, seg in enumerate(segments):
        pts = to_agent_frame(seg.points, agent_pose)
        n = len(pts)
        if n > p_max:
            raise ValueError(f"segment {seg.segment_id!r} has {n} points > p_max={p_max}")
        d = np.diff(pts, axis=0)
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        d = np.concatenate([d, d[-1:]], axis=0)
        out[s, :n, 0:2] = pts
        out[s, :n, 2:4] = d
        out[s, :n, 4] = 1.0
    return out
