"""Per-scenario feature bundles and padded batches for the forecaster."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import ModelConfig
from .errors import MixedHorizons
from .geometry import Pose2, to_agent_frame
from .mapping import LANE_FEATURE_DIM, build_index, lane_features, query_segments, split_map
from .scenario import HISTORY_DIM, INTERACTION_DIM, Scenario, build_history_features, build_interaction_features


@dataclass(frozen=True)
class FeatureBundle:
    """Everything the model consumes for one scenario; focal agent is slot 0."""

    scenario_id: str
    object_type: str
    reference: Pose2
    agent_ids: tuple[str, ...]
    hist: np.ndarray          # (A, H, 12)
    inter: np.ndarray         # (A, Nn, H, 7)
    inter_mask: np.ndarray    # (A, Nn)
    pose: np.ndarray          # (A, 4) agent pose in the focal frame: x, y, cos, sin
    lanes: np.ndarray         # (S, P, 5) focal frame
    segment_ids: tuple[str, ...]
    gt: np.ndarray            # (T, 2) focal frame
    gt_mask: np.ndarray       # (T,)
    H: int
    T: int


def scenario_features(s: Scenario, cfg: ModelConfig) -> FeatureBundle:
    if (s.H, s.T) != (cfg.H, cfg.T):
        raise MixedHorizons(f"scenario {s.scenario_id!r} has H,T={s.H},{s.T}; model expects {cfg.H},{cfg.T}")
    focal = s.focal
    ref = s.focal_reference()
    near = build_interaction_features(s, focal.agent_id, cfg.max_neighbors, cfg.neighbor_radius)
    agent_ids = (focal.agent_id,) + near.neighbor_ids
    hist = np.stack([build_history_features(s, a) for a in agent_ids])
    inters = [near] + [build_interaction_features(s, a, cfg.max_neighbors, cfg.neighbor_radius)
                       for a in agent_ids[1:]]
    n_nb = max(f.n_neighbors for f in inters)
    inter = np.zeros((len(agent_ids), n_nb, s.H, INTERACTION_DIM))
    inter_mask = np.zeros((len(agent_ids), n_nb), dtype=bool)
    for a, f in enumerate(inters):
        inter[a, :f.n_neighbors] = f.rows
        inter_mask[a, :f.n_neighbors] = True
    pose = np.zeros((len(agent_ids), 4))
    for a, aid in enumerate(agent_ids):
        p = to_agent_frame(s.track(aid).pose(s.H - 1), ref)
        pose[a] = (p.x, p.y, np.cos(p.heading), np.sin(p.heading))

    index = build_index(split_map(s.map, cfg.p_max))
    segs = query_segments(index, (ref.x, ref.y), focal.object_type, cfg.map_query(), limit=cfg.max_segments)
    lanes = lane_features(segs, ref, cfg.p_max)

    fut, fut_valid = s.focal_future()
    gt = np.where(fut_valid[:, None], to_agent_frame(fut, ref), 0.0)
    return FeatureBundle(
        scenario_id=s.scenario_id, object_type=focal.object_type, reference=ref, agent_ids=agent_ids,
        hist=hist, inter=inter, inter_mask=inter_mask, pose=pose, lanes=lanes,
        segment_ids=tuple(sg.segment_id for sg in segs), gt=gt, gt_mask=fut_valid, H=s.H, T=s.T)


@dataclass(frozen=True)
class Batch:
    scenario_ids: tuple[str, ...]
    object_types: tuple[str, ...]
    references: tuple[Pose2, ...]
    hist: np.ndarray          # (B, A, H, 12)
    agent_mask: np.ndarray    # (B, A)
    inter: np.ndarray         # (B, A, Nn, H, 7)
    inter_mask: np.ndarray    # (B, A, Nn)
    pose: np.ndarray          # (B, A, 4)
    lanes: np.ndarray         # (B, S, P, 5)
    lane_mask: np.ndarray     # (B, S)
    gt: np.ndarray            # (B, T, 2)
    gt_mask: np.ndarray       # (B, T)

    def __len__(self):
        return len(self.scenario_ids)

    def astype(self, dtype) -> "Batch":
        cast = {k: getattr(self, k).astype(dtype) for k in ("hist", "inter", "pose", "lanes", "gt")}
        return Batch(**{**self.__dict__, **cast})


def collate(bundles: Sequence[FeatureBundle], dtype=np.float32) -> Batch:
    """Pad bundles to the batch maxima of agents, neighbors and segments."""
    if not bundles:
        raise ValueError("cannot collate an empty batch")
    horizons = {(b.H, b.T) for b in bundles}
    if len(horizons) > 1:
        raise MixedHorizons(f"batch mixes horizons {sorted(horizons)}")
    H, T = bundles[0].H, bundles[0].T
    A = max(len(b.agent_ids) for b in bundles)
    Nn = max(b.inter.shape[1] for b in bundles)
    S = max(b.lanes.shape[0] for b in bundles)
    P = bundles[0].lanes.shape[1]
    hist = np.zeros((len(bundles), A, H, HISTORY_DIM), dtype=dtype)
    agent_mask = np.zeros((len(bundles), A), dtype=bool)
    inter = np.zeros((len(bundles), A, Nn, H, INTERACTION_DIM), dtype=dtype)
    inter_mask = np.zeros((len(bundles), A, Nn), dtype=bool)
    pose = np.zeros((len(bundles), A, 4), dtype=dtype)
    lanes = np.zeros((len(bundles), S, P, LANE_FEATURE_DIM), dtype=dtype)
    lane_mask = np.zeros((len(bundles), S), dtype=bool)
    for i, b in enumerate(bundles):
        a, n, s = len(b.agent_ids), b.inter.shape[1], b.lanes.shape[0]
        hist[i, :a] = b.hist
        agent_mask[i, :a] = True
        inter[i, :a, :n] = b.inter
        inter_mask[i, :a, :n] = b.inter_mask
        pose[i, :a] = b.pose
        lanes[i, :s] = b.lanes
        lane_mask[i, :s] = True
    return Batch(
        scenario_ids=tuple(b.scenario_id for b in bundles),
        object_types=tuple(b.object_type for b in bundles),
        references=tuple(b.reference for b in bundles),
        hist=hist, agent_mask=agent_mask, inter=inter, inter_mask=inter_mask, pose=pose,
        lanes=lanes, lane_mask=lane_mask,
        gt=np.stack([b.gt for b in bundles]).astype(dtype),
        gt_mask=np.stack([b.gt_mask for b in bundles]))


def make_batch(scenarios: Sequence[Scenario], cfg: ModelConfig, dtype=np.float32) -> Batch:
    """Feature extraction plus padding, in input order."""
    if not scenarios:
        raise ValueError("cannot batch zero scenarios")
    horizons = {(s.H, s.T) for s in scenarios}
    if len(horizons) > 1:
        raise MixedHorizons(f"batch mixes horizons {sorted(horizons)}")
    return collate([scenario_features(s, cfg) for s in scenarios], dtype)
