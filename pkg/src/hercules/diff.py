"""Exact training-loss gradients plus an independent finite-difference check.

Gradients are produced by reverse-mode accumulation through the full
forward pass, including the curvature parameters (the manifold itself is
trainable, so d(loss)/d(mu), d(loss)/d(tau) flow through exp/log maps,
the Mobius addition and the distance). The verifier below re-derives
every entry by central differences and never touches the reverse path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .autodiff import Tensor, logsumexp_rows, mean, value_of
from .model import score_candidates_batch
from .params import CurvatureSpec, ModelParams

GradientSet = dict  # array name -> gradient array, shape-matched to ModelParams


def _candidate_matrix(batch: np.ndarray, negatives: np.ndarray) -> np.ndarray:
    """Column 0 is the true object, the rest are sampled corruptions."""
    batch = np.asarray(batch, dtype=np.int64)
    negatives = np.asarray(negatives, dtype=np.int64)
    if batch.ndim != 2 or batch.shape[1] != 4:
        raise ValueError("batch must be an (N, 4) array of quadruples")
    if batch.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if negatives.ndim != 2 or negatives.shape[0] != batch.shape[0]:
        raise ValueError("negatives must be (N, k) with one row per batch example")
    return np.concatenate([batch[:, 2:3], negatives], axis=1)


def _per_example_loss(params, spec, batch, candidates):
    """-log softmax of the true object among its candidate scores, per row."""
    scores = score_candidates_batch(
        params, spec, batch[:, 0], batch[:, 1], batch[:, 3], candidates
    )
    return logsumexp_rows(scores) - scores[:, 0]


def batch_loss_value(params: ModelParams, spec: CurvatureSpec, batch, negatives) -> float:
    """Mean cross-entropy over the batch, eager (no gradients)."""
    batch = np.asarray(batch, dtype=np.int64)
    candidates = _candidate_matrix(batch, negatives)
    return float(np.mean(value_of(_per_example_loss(params, spec, batch, candidates))))


def loss_and_grads(params: ModelParams, spec: CurvatureSpec, batch, negatives):
    """Loss plus the exact gradient of it w.r.t. every parameter array.

    Arrays not touched by the batch get all-zero gradients. A non-finite
    per-example loss aborts with the offending quadruple named.
    """
    batch = np.asarray(batch, dtype=np.int64)
    candidates = _candidate_matrix(batch, negatives)
    leaves = {name: Tensor(arr) for name, arr in params.arrays().items()}
    holder = SimpleNamespace(
        **{name: leaves.get(name) for name in ModelParams.ARRAY_ORDER}
    )
    per_example = _per_example_loss(holder, spec, batch, candidates)
    values = value_of(per_example)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise FloatingPointError(
            f"non-finite loss for quadruple {tuple(int(v) for v in batch[bad])} "
            f"(batch row {bad})"
        )
    loss = mean(per_example)
    loss.backward()
    grads: GradientSet = {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value))
        for name, leaf in leaves.items()
    }
    return float(loss.value), grads


@dataclass
class FiniteDiffReport:
    """Outcome of comparing analytic gradients against central differences."""

    max_rel_error: float
    worst_entry: tuple[str, tuple] | None
    tolerance: float
    per_array: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def finite_diff_check(params: ModelParams, spec: CurvatureSpec, batch, negatives,
                      h: float = 1e-5, tol: float = 1e-4,
                      analytic: GradientSet | None = None) -> FiniteDiffReport:
    """Compare every parameter entry against (L(x+h) - L(x-h)) / 2h.

    `analytic` may inject precomputed gradients (e.g. for fault-injection
    tests); by default the reverse-mode gradients are used. Intended for
    small models: the sweep is O(#parameters) loss evaluations.
    """
    if not (1e-7 <= h <= 1e-3):
        raise ValueError("step size h must lie in [1e-7, 1e-3]")
    batch = np.asarray(batch, dtype=np.int64)
    if analytic is None:
        _, analytic = loss_and_grads(params, spec, batch, negatives)
    work = params.copy()
    report = FiniteDiffReport(max_rel_error=0.0, worst_entry=None, tolerance=tol)
    for name, arr in work.arrays().items():
        worst = 0.0
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = batch_loss_value(work, spec, batch, negatives)
            arr[idx] = orig - h
            down = batch_loss_value(work, spec, batch, negatives)
            arr[idx] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic[name][idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            worst = max(worst, rel)
            if rel > tol:
                report.failures.append((name, idx, float(a), float(numeric), float(rel)))
            if rel > report.max_rel_error:
                report.max_rel_error = rel
                report.worst_entry = (name, idx)
        report.per_array[name] = worst
    return report
