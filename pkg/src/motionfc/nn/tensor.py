"""Reverse-mode autodiff over numpy arrays.

Every op records its parents and a closure mapping the upstream gradient to
parent gradients. Parents that do not require gradients are skipped, so
feature inputs cost nothing on the backward pass.
"""

from __future__ import annotations

import numpy as np

from ..errors import NotScalarLoss, ShapeMismatch


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    __slots__ = ("data", "requires_grad", "param", "_prev", "_backward")

    def __init__(self, data, prev=(), backward=None, param: str | None = None, requires_grad=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.param = param
        self._prev = prev
        self._backward = backward
        if requires_grad is None:
            requires_grad = param is not None or any(p.requires_grad for p in prev)
        self.requires_grad = requires_grad

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, param={self.param!r})"

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    # elementwise -----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other, self.dtype)
        a_shape, b_shape = self.shape, other.shape

        def back(g):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor(self.data + other.data, (self, other), back)

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return as_tensor(other, self.dtype) + (-self)

    def __mul__(self, other):
        other = as_tensor(other, self.dtype)
        a, b = self, other

        def back(g):
            ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
            gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
            return ga, gb

        return Tensor(a.data * b.data, (a, b), back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def reciprocal(self):
        out = 1.0 / self.data
        return Tensor(out, (self,), lambda g: (-g * out * out,))

    def square(self):
        x = self.data
        return Tensor(x * x, (self,), lambda g: (2.0 * g * x,))

    def relu(self):
        keep = self.data > 0
        return Tensor(np.where(keep, self.data, 0).astype(self.dtype), (self,), lambda g: (g * keep,))

    def exp(self):
        out = np.exp(self.data)
        return Tensor(out, (self,), lambda g: (g * out,))

    def log(self):
        x = self.data
        return Tensor(np.log(x), (self,), lambda g: (g / x,))

    # shape ops ------------------------------------------------------------------

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.shape
        return Tensor(self.data.reshape(shape), (self,), lambda g: (g.reshape(src),))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        return Tensor(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),))

    def swap_last(self):
        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return self.transpose(axes)

    def __getitem__(self, idx):
        src_shape, dtype = self.shape, self.dtype

        def back(g):
            out = np.zeros(src_shape, dtype=dtype)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor(self.data[idx], (self,), back)

    def sum(self, axis=None, keepdims=False):
        src = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, src).astype(self.dtype),)

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,), back)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr, requires_grad=False)


def constant(x, dtype=np.float32) -> Tensor:
    return Tensor(np.asarray(x, dtype=dtype), requires_grad=False)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def back(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            if b.ndim == 2:
                k = a.shape[-1]
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return Tensor(out, (a, b), back)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), back)


def _as_mask(mask, shape) -> np.ndarray:
    return np.broadcast_to(np.asarray(mask, dtype=bool), shape)


def masked_softmax(x: Tensor, mask=None, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` over entries where ``mask`` is True.

    Masked entries get zero weight; a row with no unmasked entry is all zero.
    """
    x = as_tensor(x)
    z = x.data
    if mask is None:
        z = z - z.max(axis=axis, keepdims=True)
        e = np.exp(z)
        out = e / e.sum(axis=axis, keepdims=True)
    else:
        m = _as_mask(mask, z.shape)
        zm = np.where(m, z, -np.inf)
        top = zm.max(axis=axis, keepdims=True)
        top = np.where(np.isfinite(top), top, 0)
        e = np.where(m, np.exp(np.where(m, z - top, 0)), 0).astype(z.dtype)
        s = e.sum(axis=axis, keepdims=True)
        out = e / np.where(s > 0, s, 1)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor(out, (x,), back)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    p = np.exp(out)

    def back(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return Tensor(out, (x,), back)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeMismatch(f"layer_norm gamma/beta {gamma.shape}/{beta.shape} vs last axis {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * gamma.data + beta.data

    def back(g):
        gx = gg = gb = None
        if x.requires_grad:
            dxhat = g * gamma.data
            gx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                         - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        if gamma.requires_grad:
            gg = (g * xhat).reshape(-1, d).sum(axis=0)
        if beta.requires_grad:
            gb = g.reshape(-1, d).sum(axis=0)
        return gx, gg, gb

    return Tensor(out.astype(x.dtype), (x, gamma, beta), back)


def masked_max(x: Tensor, mask, axis: int) -> Tensor:
    """Max over ``axis`` of ``x`` restricted to rows where ``mask`` holds.

    ``mask`` has the shape of ``x`` without its last axis. Fully masked
    slices reduce to zero.
    """
    x = as_tensor(x)
    axis = axis % x.ndim
    m = np.asarray(mask, dtype=bool)[..., None]
    filled = np.where(m, x.data, -np.inf)
    idx = np.expand_dims(filled.argmax(axis=axis), axis)
    top = np.take_along_axis(filled, idx, axis=axis)
    any_valid = m.any(axis=axis, keepdims=True)
    out = np.where(any_valid, top, 0).astype(x.dtype)
    src_shape = x.shape

    def back(g):
        full = np.zeros(src_shape, dtype=g.dtype)
        np.put_along_axis(full, idx, np.expand_dims(g, axis) * any_valid, axis=axis)
        return (full,)

    return Tensor(np.squeeze(out, axis=axis), (x,), back)


def backward(loss: Tensor) -> dict[str, np.ndarray]:
    """Propagate d(loss)/d(node) through the graph; returns gradients per param name."""
    if loss.data.size != 1:
        raise NotScalarLoss(f"loss has shape {loss.shape}")
    order, seen = [], set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._prev:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    grads = {id(loss): np.ones_like(loss.data)}
    params: dict[str, np.ndarray] = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.param is not None:
            params[node.param] = params[node.param] + g if node.param in params else g
        if node._backward is None:
            continue
        for parent, pg in zip(node._prev, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
    return params
