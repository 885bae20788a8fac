"""Gradient engine checked entry-by-entry against central differences."""

import numpy as np
import pytest
from scipy.special import logsumexp, softmax

from hercules import autodiff as ad
from hercules.autodiff import Tensor


def numeric_grad(f, x, h=1e-6):
    """Central-difference gradient of scalar f at x, entry by entry."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += h
        down[idx] -= h
        g[idx] = (f(up) - f(down)) / (2 * h)
    return g


def check(expr, x, h=1e-6, tol=1e-7):
    t = Tensor(x)
    out = expr(t)
    out.backward()
    expected = numeric_grad(lambda v: float(ad.value_of(expr(Tensor(v)))), x, h=h)
    np.testing.assert_allclose(t.grad, expected, rtol=tol, atol=tol)


RNG = np.random.default_rng(0)


@pytest.mark.parametrize("expr", [
    lambda t: ad.reduce_sum(ad.tanh(t) * t),
    lambda t: ad.reduce_sum(ad.artanh(t * 0.4) + t * t),
    lambda t: ad.reduce_sum(ad.sqrt(t * t + 1.0) / (t + 3.0)),
    lambda t: ad.reduce_sum(ad.softplus(t) * ad.sigmoid(t)),
    lambda t: ad.reduce_sum(ad.cos(t) * ad.sin(t * 2.0)),
    lambda t: ad.reduce_sum(ad.exp(t * 0.3) + ad.log(t + 2.0)),
    lambda t: ad.reduce_sum(t ** 3) + ad.mean(t),
    lambda t: ad.reduce_sum((1.0 - t) / (1.0 + t * t)),
])
def test_composite_expressions(expr):
    check(expr, RNG.uniform(-0.9, 0.9, (3, 4)))


def test_broadcast_gradients_sum_back():
    a = Tensor(RNG.normal(size=(3, 1)))
    b = Tensor(RNG.normal(size=(1, 4)))
    out = ad.reduce_sum(a * b + a)
    out.backward()
    assert a.grad.shape == (3, 1)
    assert b.grad.shape == (1, 4)
    np.testing.assert_allclose(a.grad, (b.value.sum() + 4.0) * np.ones((3, 1)))
    np.testing.assert_allclose(b.grad, a.value.sum() * np.ones((1, 4)))


def test_getitem_scatter_accumulates_duplicates():
    t = Tensor(np.arange(5.0))
    idx = np.array([1, 1, 3])
    out = ad.reduce_sum(t[idx] * np.array([2.0, 3.0, 4.0]))
    out.backward()
    np.testing.assert_array_equal(t.grad, [0.0, 5.0, 0.0, 4.0, 0.0])


def test_getitem_slice_and_reshape():
    t = Tensor(RNG.normal(size=(4, 6)))
    out = ad.reduce_sum(t[:, 0::2].reshape((12,)) ** 2)
    out.backward()
    expected = np.zeros((4, 6))
    expected[:, 0::2] = 2 * t.value[:, 0::2]
    np.testing.assert_allclose(t.grad, expected)


def test_expand_dims_round_trip():
    t = Tensor(RNG.normal(size=(2, 3)))
    out = ad.reduce_sum(ad.expand_dims(t, 1) * np.ones((2, 5, 3)))
    out.backward()
    np.testing.assert_allclose(t.grad, 5.0 * np.ones((2, 3)))


def test_clip_masks_gradient_at_bounds():
    t = Tensor(np.array([-2.0, -0.5, 0.5, 2.0]))
    out = ad.reduce_sum(ad.clip(t, lo=-1.0, hi=1.0) * 3.0)
    out.backward()
    np.testing.assert_array_equal(t.grad, [0.0, 3.0, 3.0, 0.0])


def test_stack_last_interleaves_and_routes_gradients():
    a = Tensor(np.array([1.0, 2.0]))
    b = Tensor(np.array([3.0, 4.0]))
    merged = ad.stack_last(a, b)
    np.testing.assert_array_equal(merged.value, [[1, 3], [2, 4]])
    out = ad.reduce_sum(merged * np.array([[1.0, 10.0], [100.0, 1000.0]]))
    out.backward()
    np.testing.assert_array_equal(a.grad, [1.0, 100.0])
    np.testing.assert_array_equal(b.grad, [10.0, 1000.0])


def test_reduce_sum_axis_keepdims():
    t = Tensor(RNG.normal(size=(2, 3, 4)))
    out = ad.reduce_sum(ad.reduce_sum(t, axis=-1, keepdims=True) ** 2)
    out.backward()
    expected = np.broadcast_to(2 * t.value.sum(axis=-1, keepdims=True), t.shape)
    np.testing.assert_allclose(t.grad, expected)


def test_logsumexp_matches_scipy_with_softmax_gradient():
    x = RNG.normal(size=(5, 7)) * 3.0
    t = Tensor(x)
    out = ad.reduce_sum(ad.logsumexp_rows(t))
    np.testing.assert_allclose(ad.value_of(ad.logsumexp_rows(Tensor(x))),
                               logsumexp(x, axis=-1), rtol=1e-12)
    out.backward()
    np.testing.assert_allclose(t.grad, softmax(x, axis=-1), rtol=1e-12)


def test_artanh_value_is_stable_near_one():
    x = 1.0 - 1e-12
    assert np.isfinite(ad.artanh(x))
    np.testing.assert_allclose(np.tanh(ad.artanh(x)), x, rtol=1e-9)


def test_eager_helpers_return_plain_arrays():
    x = np.array([0.1, 0.2])
    for fn in (ad.tanh, ad.artanh, ad.softplus, ad.sigmoid, ad.sqrt, ad.exp):
        assert isinstance(fn(x), np.ndarray)
    assert isinstance(ad.value_of(Tensor(x)), np.ndarray)
    np.testing.assert_array_equal(ad.value_of(x), x)


def test_diamond_graph_accumulates_both_paths():
    t = Tensor(np.array(2.0))
    y = t * t  # used twice below
    out = y * 3.0 + y
    out.backward()
    # d/dt (4 t^2) = 8 t
    np.testing.assert_allclose(t.grad, 16.0)
