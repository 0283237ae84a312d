"""Transformer building blocks on top of :mod:`motionfc.nn.tensor`."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from .params import Initializer, ParameterStore
from .tensor import Tensor, as_tensor, layer_norm as _layer_norm, masked_softmax


@dataclass(frozen=True)
class AttentionConfig:
    d_model: int
    n_heads: int

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


def linear(x, W, b=None) -> Tensor:
    x, W = as_tensor(x), as_tensor(W)
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise ShapeMismatch(f"linear: x {x.shape} vs W {W.shape}")
    out = x @ W
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise ShapeMismatch(f"linear: bias {b.shape} vs W {W.shape}")
        out = out + b
    return out


def softmax(x, axis: int = -1) -> Tensor:
    return masked_softmax(as_tensor(x), None, axis)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    return _layer_norm(x, gamma, beta, eps)


def dense(store: ParameterStore, name: str, x) -> Tensor:
    return linear(x, store[f"{name}.W"], store[f"{name}.b"])


def norm(store: ParameterStore, name: str, x) -> Tensor:
    return layer_norm(x, store[f"{name}.gamma"], store[f"{name}.beta"])


def init_attention(init: Initializer, name: str, d_model: int) -> None:
    for proj in ("q", "k", "v", "o"):
        init.linear(f"{name}.{proj}", d_model, d_model)


def init_feed_forward(init: Initializer, name: str, d_model: int, d_hidden: int) -> None:
    init.linear(f"{name}.fc1", d_model, d_hidden)
    init.linear(f"{name}.fc2", d_hidden, d_model)


def feed_forward(store: ParameterStore, name: str, x) -> Tensor:
    return dense(store, f"{name}.fc2", dense(store, f"{name}.fc1", x).relu())


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    *lead, n, d = x.shape
    x = x.reshape(*lead, n, n_heads, d // n_heads)
    k = len(lead)
    axes = list(range(k)) + [k + 1, k, k + 2]
    return x.transpose(axes)


def _merge_heads(x: Tensor) -> Tensor:
    *lead, h, n, dh = x.shape
    k = len(lead)
    axes = list(range(k)) + [k + 1, k, k + 2]
    return x.transpose(axes).reshape(*lead, n, h * dh)


def multi_head_attention(q_tokens, kv_tokens, mask, cfg: AttentionConfig, params, prefix: str = "") -> Tensor:
    """Scaled dot-product attention of ``q_tokens (..., nq, d)`` over ``kv_tokens (..., nk, d)``.

    ``mask`` is boolean ``(..., nk)``, True for real tokens, or None. Queries
    whose keys are all masked produce an all-zero output row. ``params`` is a
    ParameterStore (looked up under ``prefix``) or a mapping with keys
    ``q.W, q.b, k.W, ..., o.b``.
    """
    q_tokens, kv_tokens = as_tensor(q_tokens), as_tensor(kv_tokens)
    d = cfg.d_model
    if q_tokens.shape[-1] != d or kv_tokens.shape[-1] != d:
        raise ShapeMismatch(f"attention tokens {q_tokens.shape}/{kv_tokens.shape} vs d_model={d}")

    def p(key):
        return params[f"{prefix}.{key}" if prefix else key]

    q = linear(q_tokens, p("q.W"), p("q.b"))
    k = linear(kv_tokens, p("k.W"), p("k.b"))
    v = linear(kv_tokens, p("v.W"), p("v.b"))
    h = cfg.n_heads
    qh, kh, vh = _split_heads(q, h), _split_heads(k, h), _split_heads(v, h)
    logits = (qh @ kh.swap_last()) * (1.0 / math.sqrt(cfg.d_head))
    if mask is None:
        weights = masked_softmax(logits, None)
    else:
        m = np.asarray(mask, dtype=bool)
        if m.shape[-1] != kv_tokens.shape[-2]:
            raise ShapeMismatch(f"mask {m.shape} vs kv tokens {kv_tokens.shape}")
        weights = masked_softmax(logits, m[..., None, None, :])
    out = linear(_merge_heads(weights @ vh), p("o.W"), p("o.b"))
    if mask is not None:
        live = np.asarray(mask, dtype=bool).any(axis=-1)
        if not live.all():
            out = out * live[..., None, None].astype(out.dtype)
    return out
