"""Planar rigid transforms used for agent-centric standardization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(a):
    """Wrap angles (scalar or array) into (-pi, pi]."""
    if np.isscalar(a):
        r = math.fmod(float(a) + math.pi, TWO_PI)
        if r < 0:
            r += TWO_PI
        r -= math.pi
        return math.pi if r <= -math.pi else r
    a = np.asarray(a, dtype=np.float64)
    r = np.mod(a + math.pi, TWO_PI) - math.pi
    return np.where(r <= -math.pi, r + TWO_PI, r)


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


def _rotation(theta: float) -> tuple[float, float]:
    return math.cos(theta), math.sin(theta)


def to_agent_frame(p, ref: Pose2):
    """Express ``p`` in the frame where ``ref`` sits at the origin facing +x.

    ``p`` may be a Pose2, a single point, or an ``(..., 2)`` array of points.
    """
    c, s = _rotation(ref.heading)
    if isinstance(p, Pose2):
        dx, dy = p.x - ref.x, p.y - ref.y
        return Pose2(c * dx + s * dy, -s * dx + c * dy, p.heading - ref.heading)
    pts = np.asarray(p, dtype=np.float64)
    dx = pts[..., 0] - ref.x
    dy = pts[..., 1] - ref.y
    return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)


def from_agent_frame(p, ref: Pose2):
    """Inverse of :func:`to_agent_frame`."""
    c, s = _rotation(ref.heading)
    if isinstance(p, Pose2):
        return Pose2(c * p.x - s * p.y + ref.x, s * p.x + c * p.y + ref.y, p.heading + ref.heading)
    pts = np.asarray(p, dtype=np.float64)
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([c * x - s * y + ref.x, s * x + c * y + ref.y], axis=-1)


def rotate_vectors(v, theta: float) -> np.ndarray:
    """Rotate ``(..., 2)`` direction vectors by ``theta`` (no translation)."""
    c, s = _rotation(theta)
    v = np.asarray(v, dtype=np.float64)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], axis=-1)
