"""K-means over trajectory endpoints and M-model ensemble merging."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvariantViolation, ShapeMismatch, TooFewPoints


@dataclass(frozen=True)
class KMeansResult:
    assignments: np.ndarray   # (n,)
    centroids: np.ndarray     # (K, 2)
    inertia: float
    history: tuple[float, ...] = field(default=())  # objective after each Lloyd iteration


def objective(points, assignments, centroids) -> float:
    d = np.asarray(points, dtype=np.float64) - np.asarray(centroids, dtype=np.float64)[assignments]
    return math.fsum((d * d).sum(axis=1))


def _sq_dists(points, centroids) -> np.ndarray:
    d = points[:, None, :] - centroids[None, :, :]
    return (d * d).sum(axis=-1)


def _nearest(points, centroids, prev=None) -> np.ndarray:
    d = _sq_dists(points, centroids)
    best = np.argmin(d, axis=1)
    if prev is not None:
        keep = d[np.arange(len(points)), prev] <= d[np.arange(len(points)), best]
        best = np.where(keep, prev, best)
    return best


def _kmeanspp(points, K, rng) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(points, points[chosen]).min(axis=1)
    while len(chosen) < K:
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(points, points[idx:idx + 1])[:, 0])
    return points[chosen].copy()


def _update(points, assign, K):
    """Cluster means; an empty cluster takes the point farthest from its
    centroid in the currently largest cluster."""
    assign = assign.copy()
    while True:
        counts = np.bincount(assign, minlength=K)
        empty = np.flatnonzero(counts == 0)
        centroids = np.zeros((K, 2))
        for j in range(K):
            if counts[j]:
                centroids[j] = points[assign == j].mean(axis=0)
        if not len(empty):
            return assign, centroids
        big = int(np.argmax(counts))
        members = np.flatnonzero(assign == big)
        d = ((points[members] - centroids[big]) ** 2).sum(axis=1)
        assign[members[int(np.argmax(d))]] = empty[0]


def _hartigan_move(points, assign, centroids, K):
    """Best single-point reassignment that lowers the objective, or None.

    Moving x from cluster a (size n_a) to b changes the objective by
    n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2.
    """
    counts = np.bincount(assign, minlength=K).astype(np.float64)
    d = _sq_dists(points, centroids)
    rows = np.arange(len(points))
    own = counts[assign]
    with np.errstate(divide="ignore", invalid="ignore"):
        removal = np.where(own > 1, own / (own - 1) * d[rows, assign], 0.0)
    delta = counts / (counts + 1) * d - removal[:, None]
    delta[rows, assign] = 0.0
    delta[own <= 1] = 0.0
    i, j = np.unravel_index(np.argmin(delta), delta.shape)
    scale = max(1.0, float(d.max()))
    if delta[i, j] < -1e-12 * scale:
        return int(i), int(j)
    return None


def _lloyd(points, centroids, K, max_iters):
    """Lloyd iterations, then single-point (Hartigan) moves until none helps.

    Every recorded objective is no larger than the one before it.
    """
    assign, centroids = _update(points, _nearest(points, centroids), K)
    history = [objective(points, assign, centroids)]
    for _ in range(max_iters):
        new = _nearest(points, centroids, assign)
        if np.array_equal(new, assign):
            break
        assign, centroids = _update(points, new, K)
        history.append(objective(points, assign, centroids))
    for _ in range(max_iters * len(points)):
        move = _hartigan_move(points, assign, centroids, K)
        if move is None:
            break
        assign = assign.copy()
        assign[move[0]] = move[1]
        assign, centroids = _update(points, assign, K)
        history.append(objective(points, assign, centroids))
    return KMeansResult(assign, centroids, history[-1], tuple(history))


def kmeans(points, K: int, seed: int = 0, max_iters: int = 100, n_init: int = 10) -> KMeansResult:
    """Seeded k-means++ initialization, Lloyd iterations and single-point refinement.

    Runs ``n_init`` restarts from one seeded generator and keeps the lowest
    objective (earliest restart on ties).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeMismatch(f"points must be (n, 2), got {pts.shape}")
    if K < 1 or len(pts) < K:
        raise TooFewPoints(f"{len(pts)} points for K={K}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        res = _lloyd(pts, _kmeanspp(pts, K, rng), K, max_iters)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


@dataclass(frozen=True)
class CandidateSet:
    trajectories: np.ndarray   # (M*K, T, 2)
    probabilities: np.ndarray  # (M*K,)
    source_model: np.ndarray   # (M*K,)

    def validate(self, tol: float = 1e-5) -> None:
        if len(self.trajectories) != len(self.probabilities) or len(self.probabilities) != len(self.source_model):
            raise ShapeMismatch("candidate arrays disagree in length")
        for m in np.unique(self.source_model):
            total = math.fsum(np.asarray(self.probabilities, dtype=np.float64)[self.source_model == m])
            if abs(total - 1.0) > tol:
                raise InvariantViolation("probabilities", f"model {m} probabilities sum to {total}")

    @classmethod
    def from_models(cls, trajectories, probabilities) -> "CandidateSet":
        """Stack per-model ``(K, T, 2)`` / ``(K,)`` outputs."""
        trajectories = [np.asarray(t, dtype=np.float64) for t in trajectories]
        probabilities = [np.asarray(p, dtype=np.float64) for p in probabilities]
        source = np.concatenate([np.full(len(p), m) for m, p in enumerate(probabilities)])
        return cls(np.concatenate(trajectories), np.concatenate(probabilities), source)


def ensemble_merge(c: CandidateSet, K: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Cluster candidate endpoints into ``K`` groups and average within each.

    Probabilities are averaged per cluster then renormalized. Output is
    ordered by descending probability, ties by smallest member index.
    """
    traj = np.asarray(c.trajectories, dtype=np.float64)
    probs = np.asarray(c.probabilities, dtype=np.float64)
    km = kmeans(traj[:, -1, :], K, seed=seed)
    merged_t = np.zeros((K, traj.shape[1], 2))
    merged_p = np.zeros(K)
    first = np.zeros(K, dtype=int)
    for j in range(K):
        members = np.flatnonzero(km.assignments == j)
        merged_t[j] = traj[members].sum(axis=0) / len(members)
        merged_p[j] = math.fsum(probs[members]) / len(members)
        first[j] = members[0]
    merged_p = merged_p / math.fsum(merged_p)
    order = sorted(range(K), key=lambda j: (-merged_p[j], first[j]))
    return merged_t[order], merged_p[order]
