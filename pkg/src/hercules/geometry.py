"""Closed-form Poincare-ball operations and Givens isometries.

Points live on the open ball of radius 1/sqrt(c) (curvature -c, c > 0).
Every function is a pure map over the trailing axis and broadcasts over
any number of leading axes, so the same code serves single points and
batched model passes. Inputs may be ndarrays or autodiff Tensors; argument
validation (finiteness, ball membership) is only performed for ndarrays.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, artanh, clip, reduce_sum, sqrt, stack_last, tanh, value_of

# Margin keeping tanh^-1 arguments away from 1, where gradients explode.
BALL_EPS = 1e-5

_MIN_NORM = 1e-15


def _is_eager(*args):
    return not any(isinstance(a, Tensor) for a in args)


def _check_finite(x, name):
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")


def _check_curvature(c):
    c = np.asarray(c, dtype=np.float64)
    if not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ValueError("curvature c must be positive and finite")
    return c


def _check_in_ball(x, c, name):
    n2 = np.sum(np.asarray(x, dtype=np.float64) ** 2, axis=-1, keepdims=True)
    if np.any(n2 * np.asarray(c) >= 1.0):
        raise ValueError(f"{name} lies outside the open ball of radius 1/sqrt(c)")


def _norm(x):
    """Trailing-axis L2 norm with keepdims, floored away from zero."""
    return sqrt(clip(reduce_sum(x * x, axis=-1, keepdims=True), lo=_MIN_NORM**2))


def exp0(u, c):
    """Map a tangent vector at the origin onto the ball.

    exp_0^c(u) = tanh(sqrt(c)|u|) * u / (sqrt(c)|u|); u = 0 maps to the
    origin exactly (the norm floor leaves the zero vector untouched).
    """
    if _is_eager(u, c):
        u = np.asarray(u, dtype=np.float64)
        _check_finite(u, "tangent vector")
        c = _check_curvature(c)
    sc_norm = sqrt(c) * _norm(u)
    return u * (tanh(sc_norm) / sc_norm)


def log0(v, c):
    """Map a ball point back to the tangent space at the origin.

    Inverse of :func:`exp0` up to floating tolerance. The tanh^-1 argument
    is clamped at 1 - BALL_EPS so gradients at the guard boundary use the
    projected point.
    """
    if _is_eager(v, c):
        v = np.asarray(v, dtype=np.float64)
        _check_finite(v, "ball point")
        c = _check_curvature(c)
        _check_in_ball(v, c, "ball point")
    nrm = _norm(v)
    arg = clip(sqrt(c) * nrm, hi=1.0 - BALL_EPS)
    return v * (artanh(arg) / (sqrt(c) * nrm))


def mobius_add(x, y, c):
    """Gyrovector addition keeping the result inside the ball.

    Standard form: the origin is a two-sided identity and the 1-D
    restriction reduces to (a + b) / (1 + c a b).
    """
    if _is_eager(x, y, c):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape[-1] != y.shape[-1]:
            raise ValueError("mobius_add operands must share the trailing dimension")
        c = _check_curvature(c)
        _check_in_ball(x, c, "x")
        _check_in_ball(y, c, "y")
    x2 = reduce_sum(x * x, axis=-1, keepdims=True)
    y2 = reduce_sum(y * y, axis=-1, keepdims=True)
    xy = reduce_sum(x * y, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * c * xy + c * y2) * x + (1.0 - c * x2) * y
    den = 1.0 + 2.0 * c * xy + (c * c) * x2 * y2
    return num / den


def hyp_distance(x, y, c):
    """Geodesic distance (2/sqrt(c)) tanh^-1(sqrt(c) |(-x) (+)_c y|)."""
    if _is_eager(x, y, c):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        c = _check_curvature(c)
    w = mobius_add(-1.0 * x, y, c)
    nrm = sqrt(clip(reduce_sum(w * w, axis=-1), lo=0.0))
    arg = clip(sqrt(c) * nrm, hi=1.0 - 1e-15)
    return (2.0 / sqrt(c)) * artanh(arg)


def project_to_ball(x, c):
    """Rescale points that drifted to (or past) the boundary.

    Points with |x|^2 < (1 - eps)/c are returned unchanged; anything else
    is pulled back to norm (1 - eps)/sqrt(c). Eager-only numerical safety
    valve; not part of the differentiable path.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_finite(x, "point")
    c = _check_curvature(c)
    n2 = np.sum(x * x, axis=-1, keepdims=True)
    limit = (1.0 - BALL_EPS) / c
    nrm = np.sqrt(np.maximum(n2, _MIN_NORM**2))
    scale = np.where(n2 < limit, 1.0, (1.0 - BALL_EPS) / (np.sqrt(c) * nrm))
    return x * scale


def _split_pairs(x):
    return x[..., 0::2], x[..., 1::2]


def _merge_pairs(a, b):
    merged = stack_last(a, b)
    shape = value_of(merged).shape
    return merged.reshape(shape[:-2] + (shape[-2] * shape[-1],))


def _check_angles(x, angles):
    xdim = value_of(x).shape[-1]
    adim = value_of(angles).shape[-1]
    if xdim % 2 != 0 or xdim != 2 * adim:
        raise ValueError(
            f"vector dimension {xdim} must be even and equal twice the angle count {adim}"
        )


def givens_rotate(x, angles):
    """Rotate each consecutive coordinate pair (x_2i, x_2i+1) by angles_i.

    Block-diagonal stack of 2x2 rotations; norm-preserving.
    """
    _check_angles(x, angles)
    from .autodiff import cos, sin
    xe, xo = _split_pairs(x)
    ca, sa = cos(angles), sin(angles)
    return _merge_pairs(ca * xe - sa * xo, sa * xe + ca * xo)


def givens_reflect(x, angles):
    """Reflect each consecutive coordinate pair; involution, norm-preserving.

    Block matrix [[cos a, sin a], [sin a, -cos a]].
    """
    _check_angles(x, angles)
    from .autodiff import cos, sin
    xe, xo = _split_pairs(x)
    ca, sa = cos(angles), sin(angles)
    return _merge_pairs(ca * xe + sa * xo, sa * xe - ca * xo)
