"""The forecaster: encoders, social-context transformer, anchor / proposal /
prediction decoders and the winner-take-all losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .errors import NoValidFuture, ShapeMismatch
from .features import Batch, make_batch
from .nn import (AttentionConfig, Initializer, ParameterStore, Tensor, as_tensor, concat, constant, dense,
                 feed_forward, init_attention, init_feed_forward, log_softmax, masked_max, multi_head_attention,
                 norm)
from .scenario import HISTORY_DIM, INTERACTION_DIM, Scenario

# Fixed input scaling: metric columns are divided by 10 before the first layer.
INPUT_SCALE = 0.1
_HIST_SCALE = np.array([INPUT_SCALE] * 4 + [1.0] * 8)
_INTER_SCALE = np.array([INPUT_SCALE] * 4 + [1.0] * 3)
_LANE_SCALE = np.array([INPUT_SCALE] * 2 + [1.0] * 3)
_POSE_SCALE = np.array([INPUT_SCALE] * 2 + [1.0] * 2)


def init_params(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> ParameterStore:
    """Seeded parameter initialization; same seed gives bit-identical values."""
    store = ParameterStore(dtype=dtype)
    init = Initializer(store, seed)
    d, H, P = cfg.d_model, cfg.H, cfg.p_max
    init.linear("hist.fc1", HISTORY_DIM, d)
    init.uniform("hist.time", (H, d), d)
    init.linear("hist.fc2", d, d)
    init.linear("inter.fc1", INTERACTION_DIM, d)
    init.uniform("inter.time", (H, d), d)
    init.linear("inter.fc2", d, d)
    init_attention(init, "inter.attn", d)
    init.linear("pose.fc", 4, d)
    init.norm("agent.ln", d)
    init.linear("lane.fc1", 5, d)
    init.uniform("lane.pos", (P, d), d)
    init.linear("lane.fc2", d, d)
    init.norm("lane.ln", d)
    for i in range(cfg.n_encoder_layers):
        init.norm(f"enc.{i}.ln1", d)
        init_attention(init, f"enc.{i}.attn", d)
        init.norm(f"enc.{i}.ln2", d)
        init_feed_forward(init, f"enc.{i}.ffn", d, 2 * d)
    init.norm("enc.ln_out", d)

    init.uniform("anchor.query", (cfg.N_anchors, d), d)
    init.norm("anchor.ln1", d)
    init_attention(init, "anchor.attn", d)
    init.norm("anchor.ln2", d)
    init_feed_forward(init, "anchor.ffn", d, 2 * d)
    init.norm("anchor.ln_out", d)
    init.linear("anchor.reg", d, cfg.n_waypoints * 2)
    init.linear("anchor.cls", d, 1)

    init.linear("proposal.fc1", d, d)
    init.linear("proposal.fc2", d, cfg.K_modes * cfg.T * 2)

    init.linear("pred.embed", cfg.T * 2, d)
    init.uniform("pred.mode", (cfg.K_modes, d), d)
    init.norm("pred.ln1", d)
    init_attention(init, "pred.attn_anchor", d)
    init.norm("pred.ln2", d)
    init_attention(init, "pred.attn_ctx", d)
    init.norm("pred.ln3", d)
    init_feed_forward(init, "pred.ffn", d, 2 * d)
    init.norm("pred.ln_out", d)
    init.linear("pred.reg", d, cfg.T * 2)
    init.linear("pred.cls", d, 1)
    return store


def _attn_cfg(cfg: ModelConfig) -> AttentionConfig:
    return AttentionConfig(cfg.d_model, cfg.n_heads)


def _embed_sequence(store, name, step_param, x: np.ndarray, valid: np.ndarray) -> Tensor:
    """Shared per-step MLP with a learned step embedding, max-pooled over steps."""
    h = dense(store, f"{name}.fc1", constant(x, store.dtype)) + store[step_param]
    h = dense(store, f"{name}.fc2", h.relu())
    return masked_max(h, valid, axis=-2)


def encode_social_context(batch: Batch, cfg: ModelConfig, store: ParameterStore) -> tuple[Tensor, np.ndarray]:
    """Joint agent + lane-segment token set after the self-attention stack.

    Returns tokens ``(B, A+S, d)`` and their mask. Agent slot 0 is the focal
    agent.
    """
    if batch.hist.shape[-1] != HISTORY_DIM or batch.inter.shape[-1] != INTERACTION_DIM:
        raise ShapeMismatch("feature widths do not match the model")
    acfg = _attn_cfg(cfg)
    B, A = batch.agent_mask.shape
    d = cfg.d_model

    hist_valid = batch.hist[..., -1] > 0.5
    agent = _embed_sequence(store, "hist", "hist.time", batch.hist * _HIST_SCALE, hist_valid)        # (B, A, d)

    Nn = batch.inter.shape[2]
    if Nn:
        inter_valid = batch.inter[..., -1] > 0.5
        nb = _embed_sequence(store, "inter", "inter.time", batch.inter * _INTER_SCALE, inter_valid)   # (B, A, Nn, d)
        q = agent.reshape(B, A, 1, d)
        social = multi_head_attention(q, nb, batch.inter_mask, acfg, store, "inter.attn").reshape(B, A, d)
        agent = agent + social
    agent = agent + dense(store, "pose.fc", constant(batch.pose * _POSE_SCALE, store.dtype))
    agent = norm(store, "agent.ln", agent)

    lane_valid = batch.lanes[..., -1] > 0.5
    lanes = _embed_sequence(store, "lane", "lane.pos", batch.lanes * _LANE_SCALE, lane_valid)        # (B, S, d)
    lanes = norm(store, "lane.ln", lanes)

    x = concat([agent, lanes], axis=1)
    mask = np.concatenate([batch.agent_mask, batch.lane_mask], axis=1)
    for i in range(cfg.n_encoder_layers):
        h = norm(store, f"enc.{i}.ln1", x)
        x = x + multi_head_attention(h, h, mask, acfg, store, f"enc.{i}.attn")
        x = x + feed_forward(store, f"enc.{i}.ffn", norm(store, f"enc.{i}.ln2", x))
    return norm(store, "enc.ln_out", x), mask


def decode_anchors(context: Tensor, mask, cfg: ModelConfig, store: ParameterStore):
    """N learned queries attend over the context.

    Returns ``(embeddings (B, N, d), waypoints (B, N, T/stride, 2), logits (B, N))``.
    """
    B = context.shape[0]
    N, d = cfg.N_anchors, cfg.d_model
    q = store["anchor.query"].reshape(1, N, d) + constant(np.zeros((B, 1, 1)), store.dtype)
    q = q + multi_head_attention(norm(store, "anchor.ln1", q), context, mask, _attn_cfg(cfg), store,
                                 "anchor.attn")
    q = q + feed_forward(store, "anchor.ffn", norm(store, "anchor.ln2", q))
    emb = norm(store, "anchor.ln_out", q)
    waypoints = dense(store, "anchor.reg", emb).reshape(B, N, cfg.n_waypoints, 2)
    logits = dense(store, "anchor.cls", emb).reshape(B, N)
    return emb, waypoints, logits


def decode_proposals(focal_token, cfg: ModelConfig, store: ParameterStore) -> Tensor:
    """Feed-forward head from the focal token ``(B, d)`` to ``(B, K, T, 2)`` proposals."""
    focal_token = as_tensor(focal_token)
    B = focal_token.shape[0]
    h = dense(store, "proposal.fc1", focal_token).relu()
    return dense(store, "proposal.fc2", h).reshape(B, cfg.K_modes, cfg.T, 2)


def decode_predictions(anchor_emb: Tensor, proposals: Tensor, context: Tensor, mask, cfg: ModelConfig,
                       store: ParameterStore):
    """Refine proposals with attention over anchors and context.

    Returns ``(trajectories (B, K, T, 2), log_probs (B, K))``; trajectories are
    proposals plus regressed offsets.
    """
    proposals = as_tensor(proposals)
    B, K, T = proposals.shape[:3]
    acfg = _attn_cfg(cfg)
    q = dense(store, "pred.embed", proposals.reshape(B, K, T * 2) * INPUT_SCALE) + store["pred.mode"]
    q = q + multi_head_attention(norm(store, "pred.ln1", q), anchor_emb, None, acfg, store, "pred.attn_anchor")
    q = q + multi_head_attention(norm(store, "pred.ln2", q), context, mask, acfg, store, "pred.attn_ctx")
    q = q + feed_forward(store, "pred.ffn", norm(store, "pred.ln3", q))
    q = norm(store, "pred.ln_out", q)
    offsets = dense(store, "pred.reg", q).reshape(B, K, T, 2)
    logits = dense(store, "pred.cls", q).reshape(B, K)
    return proposals + offsets, log_softmax(logits, axis=-1)


@dataclass
class ForwardResult:
    trajectories: Tensor   # (B, K, T, 2)
    log_probs: Tensor      # (B, K)
    anchors: Tensor        # (B, N, W, 2)
    anchor_logits: Tensor  # (B, N)
    proposals: Tensor      # (B, K, T, 2)
    context: Tensor
    context_mask: np.ndarray


def forward_batch(batch: Batch, cfg: ModelConfig, store: ParameterStore) -> ForwardResult:
    context, mask = encode_social_context(batch, cfg, store)
    emb, waypoints, anchor_logits = decode_anchors(context, mask, cfg, store)
    proposals = decode_proposals(context[:, 0, :], cfg, store)
    traj, log_probs = decode_predictions(emb, proposals, context, mask, cfg, store)
    return ForwardResult(traj, log_probs, waypoints, anchor_logits, proposals, context, mask)


@dataclass(frozen=True)
class ForecastOutput:
    """Focal-agent forecast in the focal agent frame."""

    trajectories: np.ndarray  # (K, T, 2)
    probabilities: np.ndarray  # (K,)
    anchors: np.ndarray        # (N, T/stride, 2)
    proposals: np.ndarray      # (K, T, 2)


def outputs_from(result: ForwardResult) -> list[ForecastOutput]:
    probs = np.exp(result.log_probs.data.astype(np.float64))
    probs = probs / probs.sum(axis=-1, keepdims=True)
    return [
        ForecastOutput(result.trajectories.data[b].copy(), probs[b], result.anchors.data[b].copy(),
                       result.proposals.data[b].copy())
        for b in range(len(probs))
    ]


def forward(s: Scenario, cfg: ModelConfig, store: ParameterStore) -> ForecastOutput:
    return outputs_from(forward_batch(make_batch([s], cfg, store.dtype), cfg, store))[0]


# losses ---------------------------------------------------------------------

@dataclass(frozen=True)
class LossBreakdown:
    anchor_reg: float
    anchor_cls: float
    pred_reg: float
    pred_cls: float
    total: float

    def as_row(self) -> tuple[float, float, float, float, float]:
        return self.anchor_reg, self.anchor_cls, self.pred_reg, self.pred_cls, self.total


def _batched(x, extra_dims: int):
    t = as_tensor(x)
    if t.ndim == extra_dims:
        return t.reshape(1, *t.shape), True
    return t, False


def winner_take_all(candidates, log_probs, gt, mask):
    """Per-sample ``(reg, cls, best)`` for candidates ``(B, C, S, 2)``.

    reg is the mean squared displacement of the best candidate over valid
    steps; cls is its negative log probability. Ties pick the lowest index.
    """
    candidates = as_tensor(candidates)
    gt = np.asarray(gt, dtype=candidates.dtype)
    valid = np.asarray(mask, dtype=bool)
    n_valid = valid.sum(axis=-1)
    if np.any(n_valid == 0):
        raise NoValidFuture("ground truth has no valid step")
    diff = candidates - constant(gt[:, None], candidates.dtype)
    sq = diff.square().sum(axis=-1)                                            # (B, C, S)
    weights = (valid / n_valid[:, None]).astype(candidates.dtype)[:, None, :]
    per_cand = (sq * weights).sum(axis=-1)                                     # (B, C)
    best = np.argmin(per_cand.data, axis=-1)
    rows = np.arange(len(best))
    reg = per_cand[rows, best]
    cls = -as_tensor(log_probs)[rows, best]
    return reg, cls, best


def _anchor_targets(gt, mask, stride: int):
    gt = np.asarray(gt)
    mask = np.asarray(mask, dtype=bool)
    return gt[..., stride - 1::stride, :], mask[..., stride - 1::stride]


def anchor_loss(anchor_waypoints, anchor_logits, gt_future, mask=None, stride: int = 10):
    """Winner-take-all MSE plus cross entropy on sparse waypoints.

    Accepts a single sample ``(N, W, 2)`` or a batch ``(B, N, W, 2)``; the
    ground truth is subsampled every ``stride`` steps (ending at the final
    step). Returns batch-mean ``(reg, cls)`` tensors.
    """
    wp, single = _batched(anchor_waypoints, 3)
    gt = np.asarray(gt_future)
    if single:
        gt = gt[None]
    mask = np.ones(gt.shape[:-1], dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(gt.shape[:-1])
    gt_w, mask_w = _anchor_targets(gt, mask, stride)
    if gt_w.shape[-2] != wp.shape[-2]:
        raise ShapeMismatch(f"{wp.shape[-2]} waypoints vs {gt_w.shape[-2]} subsampled targets")
    if not mask.any(axis=-1).all():
        raise NoValidFuture("ground truth has no valid future step")
    logits, _ = _batched(anchor_logits, 1)
    reg, cls, _ = winner_take_all(wp, log_softmax(logits, axis=-1), gt_w, mask_w)
    return reg.mean(), cls.mean()


def prediction_loss(trajectories, probabilities, gt_future, mask=None, log_probs=None):
    """Winner-take-all MSE over all steps plus cross entropy over modes.

    Pass ``log_probs`` instead of ``probabilities`` when available (stabler).
    """
    tr, single = _batched(trajectories, 3)
    gt = np.asarray(gt_future)
    if single:
        gt = gt[None]
    mask = np.ones(gt.shape[:-1], dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(gt.shape[:-1])
    if log_probs is None:
        p, _ = _batched(probabilities, 1)
        floor = np.finfo(p.dtype if p.dtype.kind == "f" else np.float64).tiny
        log_probs = Tensor(np.maximum(p.data, floor), (p,), lambda g: (g,)).log()
    else:
        log_probs, _ = _batched(log_probs, 1)
    reg, cls, _ = winner_take_all(tr, log_probs, gt, mask)
    return reg.mean(), cls.mean()


def compute_losses(result: ForwardResult, batch: Batch, cfg: ModelConfig, weights=(1.0, 1.0, 1.0, 1.0)):
    """Weighted total loss tensor and its breakdown (batch means)."""
    a_reg, a_cls = anchor_loss(result.anchors, result.anchor_logits, batch.gt, batch.gt_mask,
                               cfg.anchor_waypoint_stride)
    p_reg, p_cls = prediction_loss(result.trajectories, None, batch.gt, batch.gt_mask, log_probs=result.log_probs)
    w = weights
    total = a_reg * w[0] + a_cls * w[1] + p_reg * w[2] + p_cls * w[3]
    parts = [float(t.data) for t in (a_reg, a_cls, p_reg, p_cls)]
    return total, LossBreakdown(*parts, float(total.data))


def predict_dataset(scenarios, cfg: ModelConfig, store: ParameterStore, batch_size: int = 12):
    """World-frame forecasts for every scenario, as ``(scenario_id, trajectories, probabilities)``."""
    from .geometry import from_agent_frame

    out = []
    for start in range(0, len(scenarios), batch_size):
        chunk = scenarios[start:start + batch_size]
        batch = make_batch(chunk, cfg, store.dtype)
        for s, fo in zip(chunk, outputs_from(forward_batch(batch, cfg, store))):
            out.append((s.scenario_id, from_agent_frame(fo.trajectories, s.focal_reference()), fo.probabilities))
    return out
