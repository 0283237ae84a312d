"""Mini-batch training loop and checkpoint management."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import ModelConfig, dataclass_from_kv, dataclass_to_kv
from .errors import ConfigError, CorruptCheckpoint, EmptyDataset, MixedHorizons, NonFiniteLoss
from .features import Batch, collate, make_batch, scenario_features
from .model import LossBreakdown, compute_losses, forward_batch, init_params
from .nn import ParameterStore, adam_step, backward
from .nn import checkpoint as ckpt
from .scenario import Scenario

log = logging.getLogger(__name__)

__all__ = ["Batch", "TrainConfig", "TrainResult", "load_checkpoint", "make_batch", "save_checkpoint", "train",
           "format_log_line"]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 12
    epochs: int = 300
    lr: float = 1e-3
    seed: int = 0
    loss_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size", "must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs", "must be >= 0")
        if not self.lr > 0:
            raise ConfigError("lr", "must be > 0")
        if len(self.loss_weights) != 4 or any(w < 0 for w in self.loss_weights):
            raise ConfigError("loss_weights", "need four non-negative weights")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError("clip_norm", "must be > 0")

    def to_kv(self) -> dict[str, str]:
        return dataclass_to_kv(self)

    @classmethod
    def from_kv(cls, items: dict[str, str]) -> "TrainConfig":
        return dataclass_from_kv(cls, items)


@dataclass
class TrainResult:
    store: ParameterStore
    history: list[LossBreakdown]
    steps: int


def format_log_line(epoch: int, b: LossBreakdown) -> str:
    return "\t".join([str(epoch)] + ["%.9g" % v for v in b.as_row()])


def _mean_breakdown(parts: Sequence[tuple[LossBreakdown, int]]) -> LossBreakdown:
    n = sum(w for _, w in parts)
    rows = np.array([b.as_row() for b, _ in parts], dtype=np.float64)
    weights = np.array([w for _, w in parts], dtype=np.float64)[:, None]
    return LossBreakdown(*(rows * weights).sum(axis=0) / n)


def train(
    dataset: Sequence[Scenario],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    out_path=None,
    log_path=None,
    on_epoch: Callable[[int, LossBreakdown], None] | None = None,
    store: ParameterStore | None = None,
) -> TrainResult:
    """Train on ``dataset`` and optionally write the checkpoint and epoch log.

    Shuffling and initialization are seeded by ``train_cfg.seed``; the last
    partial batch of an epoch is kept.
    """
    if not dataset:
        raise EmptyDataset("training needs at least one scenario")
    horizons = {(s.H, s.T) for s in dataset}
    if len(horizons) > 1:
        raise MixedHorizons(f"dataset mixes horizons {sorted(horizons)}")
    bundles = [scenario_features(s, model_cfg) for s in dataset]
    store = init_params(model_cfg, train_cfg.seed) if store is None else store
    rng = np.random.default_rng(train_cfg.seed)
    history, step = [], 0
    log_fh = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    try:
        for epoch in range(1, train_cfg.epochs + 1):
            order = rng.permutation(len(bundles))
            parts = []
            for start in range(0, len(order), train_cfg.batch_size):
                batch = collate([bundles[i] for i in order[start:start + train_cfg.batch_size]])
                result = forward_batch(batch, model_cfg, store)
                total, breakdown = compute_losses(result, batch, model_cfg, train_cfg.loss_weights)
                if not math.isfinite(breakdown.total):
                    raise NonFiniteLoss(step, breakdown.total)
                backward(total, store)
                adam_step(store, train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.eps, train_cfg.clip_norm)
                parts.append((breakdown, len(batch)))
                step += 1
            summary = _mean_breakdown(parts)
            history.append(summary)
            line = format_log_line(epoch, summary)
            log.debug(line)
            if log_fh is not None:
                log_fh.write(line + "\n")
                log_fh.flush()
            if on_epoch is not None:
                on_epoch(epoch, summary)
    finally:
        if log_fh is not None:
            log_fh.close()
    store.zero_grad()
    if out_path is not None:
        save_checkpoint(store, model_cfg, out_path)
    return TrainResult(store, history, step)


def save_checkpoint(store: ParameterStore, cfg: ModelConfig, path) -> None:
    ckpt.save(store, cfg.to_kv(), path)


def load_checkpoint(path, expected: ModelConfig | None = None) -> tuple[ParameterStore, ModelConfig]:
    """Read a checkpoint and check it against the model it claims to hold.

    Raises CorruptCheckpoint on bad magic, truncation, a header that does not
    parse, parameter shape mismatches, or a header differing from
    ``expected`` (the message names the first differing field).
    """
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CorruptCheckpoint(f"cannot read {path}: {exc}") from None
    store, header = ckpt.loads(blob)
    try:
        cfg = ModelConfig.from_kv(header)
    except ConfigError as exc:
        raise CorruptCheckpoint(f"bad model header field {exc.field}: {exc}") from None
    if expected is not None:
        for f in fields(ModelConfig):
            if getattr(cfg, f.name) != getattr(expected, f.name):
                raise CorruptCheckpoint(
                    f"header field {f.name} = {getattr(cfg, f.name)!r}, expected {getattr(expected, f.name)!r}")
    skeleton = init_params(cfg)
    if store.names() != skeleton.names():
        missing = sorted(set(skeleton.names()) ^ set(store.names()))
        raise CorruptCheckpoint(f"parameter set mismatch: {missing[:3]}")
    for name in skeleton.names():
        if store.value(name).shape != skeleton.value(name).shape:
            raise CorruptCheckpoint(
                f"shape mismatch for {name}: {store.value(name).shape} vs {skeleton.value(name).shape}")
    return store, cfg
