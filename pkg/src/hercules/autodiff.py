"""Minimal reverse-mode automatic differentiation on numpy arrays.

A ``Tensor`` wraps a float64 ndarray and records enough of the computation
graph to produce exact gradients of a scalar output with respect to every
leaf. All ops broadcast like numpy; gradients of broadcast operands are
summed back to the operand shape.

The module-level math helpers (``tanh``, ``artanh``, ``reduce_sum``, ...)
accept either a ``Tensor`` or a plain ndarray/scalar, so the same formula
code can run eagerly (evaluation) or on the tape (training).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Node in the computation graph. Leaves have no parents."""

    __slots__ = ("value", "grad", "_parents", "_vjps")

    def __init__(self, value, parents=(), vjps=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjps = vjps

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    # -- graph traversal -------------------------------------------------

    def backward(self):
        """Accumulate gradients of `self` (summed if non-scalar) into leaves."""
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = contrib.copy() if contrib is g else contrib
                else:
                    parent.grad = parent.grad + contrib

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            return Tensor(
                self.value + other.value,
                (self, other),
                (lambda g: _unbroadcast(g, self.shape),
                 lambda g: _unbroadcast(g, other.shape)),
            )
        other = np.asarray(other, dtype=np.float64)
        return Tensor(self.value + other, (self,),
                      (lambda g: _unbroadcast(g, self.shape),))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.value, (self,), (lambda g: -g,))

    def __sub__(self, other):
        return self + (-other if isinstance(other, Tensor) else -np.asarray(other, dtype=np.float64))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return Tensor(
                self.value * other.value,
                (self, other),
                (lambda g: _unbroadcast(g * other.value, self.shape),
                 lambda g: _unbroadcast(g * self.value, other.shape)),
            )
        other = np.asarray(other, dtype=np.float64)
        return Tensor(self.value * other, (self,),
                      (lambda g: _unbroadcast(g * other, self.shape),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            inv = 1.0 / other.value
            return Tensor(
                self.value * inv,
                (self, other),
                (lambda g: _unbroadcast(g * inv, self.shape),
                 lambda g: _unbroadcast(-g * self.value * inv * inv, other.shape)),
            )
        other = np.asarray(other, dtype=np.float64)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        other = np.asarray(other, dtype=np.float64)
        inv = 1.0 / self.value
        return Tensor(other * inv, (self,),
                      (lambda g: _unbroadcast(-g * other * inv * inv, self.shape),))

    def __pow__(self, exponent):
        if not np.isscalar(exponent):
            raise TypeError("only scalar exponents are supported")
        val = self.value ** exponent
        return Tensor(val, (self,),
                      (lambda g: g * exponent * self.value ** (exponent - 1),))

    def __getitem__(self, key):
        val = self.value[key]
        shape = self.shape

        def vjp(g):
            out = np.zeros(shape, dtype=np.float64)
            np.add.at(out, key, g)
            return out

        return Tensor(val, (self,), (vjp,))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        old = self.shape
        return Tensor(self.value.reshape(shape), (self,),
                      (lambda g: g.reshape(old),))


def _is_tensor(x):
    return isinstance(x, Tensor)


def _elementwise(x, fwd, dfn):
    """Unary op: `fwd` on values, `dfn(value) * g` as the vjp."""
    if _is_tensor(x):
        val = fwd(x.value)
        return Tensor(val, (x,), (lambda g: g * dfn(x.value, val),))
    return fwd(np.asarray(x, dtype=np.float64))


# -- unary math ----------------------------------------------------------

def tanh(x):
    return _elementwise(x, np.tanh, lambda v, out: 1.0 - out * out)


def _artanh_value(v):
    # stable tanh^-1 via log1p; valid for |v| < 1
    return 0.5 * (np.log1p(v) - np.log1p(-v))


def artanh(x):
    return _elementwise(x, _artanh_value, lambda v, out: 1.0 / (1.0 - v * v))


def exp(x):
    return _elementwise(x, np.exp, lambda v, out: out)


def log(x):
    return _elementwise(x, np.log, lambda v, out: 1.0 / v)


def sqrt(x):
    return _elementwise(x, np.sqrt, lambda v, out: 0.5 / out)


def softplus(x):
    """ln(1 + e^x), the smooth strictly-positive ReLU surrogate."""
    return _elementwise(x, lambda v: np.logaddexp(0.0, v), lambda v, out: expit(v))


def sigmoid(x):
    return _elementwise(x, expit, lambda v, out: out * (1.0 - out))


def cos(x):
    return _elementwise(x, np.cos, lambda v, out: -np.sin(v))


def sin(x):
    return _elementwise(x, np.sin, lambda v, out: np.cos(v))


def clip(x, lo=None, hi=None):
    """Clamp; gradient is passed through only where no bound is active."""
    if _is_tensor(x):
        val = np.clip(x.value, lo, hi)
        mask = np.ones_like(x.value)
        if lo is not None:
            mask = mask * (x.value >= lo)
        if hi is not None:
            mask = mask * (x.value <= hi)
        return Tensor(val, (x,), (lambda g: g * mask,))
    return np.clip(np.asarray(x, dtype=np.float64), lo, hi)


def reduce_sum(x, axis=None, keepdims=False):
    if _is_tensor(x):
        val = x.value.sum(axis=axis, keepdims=keepdims)
        shape = x.shape

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, shape).copy()

        return Tensor(val, (x,), (vjp,))
    return np.asarray(x, dtype=np.float64).sum(axis=axis, keepdims=keepdims)


def mean(x, axis=None):
    if _is_tensor(x):
        n = x.value.size if axis is None else x.value.shape[axis]
        return reduce_sum(x, axis=axis) * (1.0 / n)
    return np.asarray(x, dtype=np.float64).mean(axis=axis)


def stack_last(a, b):
    """Interleave two equally-shaped arrays along a new trailing axis."""
    if _is_tensor(a) or _is_tensor(b):
        a = a if _is_tensor(a) else Tensor(a)
        b = b if _is_tensor(b) else Tensor(b)
        val = np.stack([a.value, b.value], axis=-1)
        return Tensor(val, (a, b),
                      (lambda g: g[..., 0], lambda g: g[..., 1]))
    return np.stack([a, b], axis=-1)


def expand_dims(x, axis):
    if _is_tensor(x):
        old = x.shape
        return Tensor(np.expand_dims(x.value, axis), (x,),
                      (lambda g: g.reshape(old),))
    return np.expand_dims(np.asarray(x, dtype=np.float64), axis)


def value_of(x):
    return x.value if _is_tensor(x) else np.asarray(x, dtype=np.float64)


def logsumexp_rows(x):
    """Row-wise logsumexp over the last axis of a 2-D input, max-shifted.

    The shift uses the detached row max; the result (and its gradient) is
    exact because logsumexp is invariant to the shift.
    """
    m = value_of(x).max(axis=-1, keepdims=True)
    shifted = x - m
    return log(reduce_sum(exp(shifted), axis=-1)) + np.squeeze(m, axis=-1)
