"""Named parameter storage, seeded initialization and the Adam optimizer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingGradients
from .tensor import Tensor
from .tensor import backward as _graph_backward


@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray | None = None
    m: np.ndarray | None = None
    v: np.ndarray | None = None


@dataclass
class ParameterStore:
    params: dict[str, Parameter] = field(default_factory=dict)
    step: int = 0
    dtype: type = np.float32

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def value(self, name: str) -> np.ndarray:
        return self.params[name].value

    def grad(self, name: str) -> np.ndarray | None:
        return self.params[name].grad

    def add(self, name: str, value) -> np.ndarray:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        arr = np.array(value, dtype=self.dtype)
        self.params[name] = Parameter(arr)
        return arr

    def set(self, name: str, value) -> None:
        p = self.params[name]
        arr = np.asarray(value, dtype=p.value.dtype)
        if arr.shape != p.value.shape:
            raise ValueError(f"{name}: shape {arr.shape} != {p.value.shape}")
        p.value[...] = arr

    def tensor(self, name: str) -> Tensor:
        return Tensor(self.params[name].value, param=name)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensor(name)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def astype(self, dtype) -> "ParameterStore":
        """Copy of the values only, cast to ``dtype`` (optimizer state dropped)."""
        out = ParameterStore(dtype=dtype)
        for name, p in self.params.items():
            out.add(name, p.value.astype(dtype))
        return out

    def copy(self) -> "ParameterStore":
        return self.astype(self.dtype)

    def n_values(self) -> int:
        return sum(p.value.size for p in self.params.values())


class Initializer:
    """Seeded uniform(-s, s) initialization with s = sqrt(1/fan_in)."""

    def __init__(self, store: ParameterStore, seed: int):
        self.store = store
        self.rng = np.random.default_rng(seed)

    def uniform(self, name: str, shape: tuple, fan_in: int) -> None:
        s = math.sqrt(1.0 / fan_in)
        self.store.add(name, self.rng.uniform(-s, s, size=shape))

    def linear(self, name: str, d_in: int, d_out: int) -> None:
        self.uniform(f"{name}.W", (d_in, d_out), d_in)
        self.uniform(f"{name}.b", (d_out,), d_in)

    def norm(self, name: str, d: int) -> None:
        self.store.add(f"{name}.gamma", np.ones(d))
        self.store.add(f"{name}.beta", np.zeros(d))


def backward(loss: Tensor, store: ParameterStore) -> ParameterStore:
    """Populate every gradient slot of ``store`` from ``loss``.

    Parameters the loss does not reach receive zero gradients.
    """
    grads = _graph_backward(loss)
    for name, p in store.params.items():
        g = grads.get(name)
        p.grad = np.zeros_like(p.value) if g is None else np.asarray(g, dtype=p.value.dtype).reshape(p.value.shape)
    return store


def grad_norm(store: ParameterStore) -> float:
    return math.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in store.params.values()
                         if p.grad is not None))


def adam_step(
    store: ParameterStore,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    clip_norm: float | None = None,
) -> ParameterStore:
    """One bias-corrected Adam update, in place. Moments live in the store."""
    missing = [n for n, p in store.params.items() if p.grad is None]
    if missing:
        raise MissingGradients(f"no gradient for {missing[0]!r} (+{len(missing) - 1} more)")
    scale = 1.0
    if clip_norm is not None:
        norm = grad_norm(store)
        if norm > clip_norm:
            scale = clip_norm / norm
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p in store.params.values():
        g = p.grad if scale == 1.0 else p.grad * p.value.dtype.type(scale)
        if p.m is None:
            p.m = np.zeros_like(p.value)
            p.v = np.zeros_like(p.value)
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * (g * g)
        m_hat = p.m / c1
        v_hat = p.v / c2
        p.value -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.value.dtype)
    return store
