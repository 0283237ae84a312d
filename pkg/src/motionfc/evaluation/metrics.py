"""Displacement metrics for multi-modal forecasts.

All functions take ``preds (K, T, 2)``, ``gt (T, 2)`` and an optional
boolean ``mask (T,)`` of valid ground-truth steps. Sums use ``math.fsum`` so
results do not depend on summation order. Ties between modes go to the
lowest index.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import NoValidFuture, ShapeMismatch

MISS_THRESHOLD = 2.0


def _prepare(preds, gt, mask):
    preds = np.asarray(preds, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if preds.ndim != 3 or preds.shape[1:] != gt.shape or gt.shape[-1] != 2:
        raise ShapeMismatch(f"preds {preds.shape} vs gt {gt.shape}")
    mask = np.ones(len(gt), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (len(gt),):
        raise ShapeMismatch(f"mask {mask.shape} vs gt {gt.shape}")
    if not mask.any():
        raise NoValidFuture("ground truth has no valid step")
    return preds, gt, mask


def displacements(preds, gt) -> np.ndarray:
    """Euclidean error per mode and step, ``(K, T)``."""
    d = np.asarray(preds, dtype=np.float64) - np.asarray(gt, dtype=np.float64)
    return np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1])


def ade_per_mode(preds, gt, mask=None) -> np.ndarray:
    preds, gt, mask = _prepare(preds, gt, mask)
    dist = displacements(preds, gt)[:, mask]
    n = dist.shape[1]
    return np.array([math.fsum(row) / n for row in dist])


def fde_per_mode(preds, gt, mask=None) -> np.ndarray:
    preds, gt, mask = _prepare(preds, gt, mask)
    last = int(np.flatnonzero(mask)[-1])
    return displacements(preds[:, last:last + 1], gt[last:last + 1])[:, 0]


def min_ade(preds, gt, mask=None) -> float:
    return float(ade_per_mode(preds, gt, mask).min())


def min_fde(preds, gt, mask=None) -> float:
    return float(fde_per_mode(preds, gt, mask).min())


def miss_rate(preds, gt, mask=None, threshold: float = MISS_THRESHOLD) -> float:
    """1.0 when the best endpoint error exceeds ``threshold`` (strictly), else 0.0."""
    return 1.0 if min_fde(preds, gt, mask) > threshold else 0.0


def brier_metrics(preds, probabilities, gt, mask=None) -> tuple[float, float]:
    """``(brier_minADE, brier_minFDE)``: the min metric plus ``(1 - p)**2``
    where ``p`` is the probability of the mode attaining that minimum."""
    probs = np.asarray(probabilities, dtype=np.float64)
    ade = ade_per_mode(preds, gt, mask)
    fde = fde_per_mode(preds, gt, mask)
    if probs.shape != ade.shape:
        raise ShapeMismatch(f"{probs.shape} probabilities for {len(ade)} modes")
    ia, jf = int(np.argmin(ade)), int(np.argmin(fde))
    return float(ade[ia]) + (1.0 - float(probs[ia])) ** 2, float(fde[jf]) + (1.0 - float(probs[jf])) ** 2


def top_k(probabilities, k: int) -> np.ndarray:
    """Indices of the ``k`` most probable modes, most probable first, ties by index."""
    probs = np.asarray(probabilities, dtype=np.float64)
    order = np.argsort(-probs, kind="stable")
    return order[:k]
