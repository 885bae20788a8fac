"""Curvature-difference studies and 2-D embedding export.

These consume trained checkpoints and emit plain CSV so any external tool
can render heatmaps or disc plots; figure rendering lives with the CLI.
"""

from __future__ import annotations

import csv

import numpy as np

from . import geometry
from .model import curvature
from .params import CurvatureSpec, ModelParams


def _softplus(x):
    return np.logaddexp(0.0, x)


def curvature_matrix(params: ModelParams, spec: CurvatureSpec, n_relations: int):
    """Learned curvature per forward relation (rows) and timestamp (cols).

    Inverse relations are excluded. Time-unaware specs give a vector; the
    dot-product variant is reported at its relation-time backbone (the
    data-dependent factor has no single value per cell).
    """
    mu = params.rel_curv[:n_relations]
    if not spec.time_curvature:
        return _softplus(mu)
    if params.time_curv is None:
        raise ValueError("spec requires time curvature but time_curv is absent")
    return _softplus(np.outer(mu, params.time_curv))


def curvature_delta(a, b, threshold: float = 0.1):
    """Elementwise |a - b| plus the fraction of entries below `threshold`.

    Vector-vs-matrix comparisons broadcast (time-unaware against
    time-aware); incompatible shapes raise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1 and b.ndim == 2:
        a = a[:, None]
    elif b.ndim == 1 and a.ndim == 2:
        b = b[:, None]
    try:
        delta = np.abs(a - b)
    except ValueError:
        raise ValueError(f"shapes {a.shape} and {b.shape} are not broadcast-compatible")
    fraction = float(np.mean(delta < threshold))
    return delta, fraction


def delta_fractions(delta, thresholds=(0.05, 0.1, 0.2, 1.0)) -> dict:
    """Fraction of entries below each threshold (monotone in the threshold)."""
    delta = np.asarray(delta)
    return {float(t): float(np.mean(delta < t)) for t in thresholds}


def write_curvature_csv(matrix, path, vocab=None):
    """Dump a curvature (or delta) vector/matrix with header row."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["relation"] + [f"t{j}" for j in range(matrix.shape[1])])
        for i, row in enumerate(matrix):
            label = vocab.relations[i] if vocab is not None else str(i)
            writer.writerow([label] + [f"{v:.10g}" for v in row])


def export_embeddings_2d(params: ModelParams, spec: CurvatureSpec, vocab,
                         p: int, t: int, path) -> int:
    """Write (entity, x, y) rows of exp-mapped 2-D embeddings; returns row count.

    Requires a model trained with dim = 2; the mapping uses the model's
    own curvature c(p, t), so points sit strictly inside radius 1/sqrt(c).
    """
    if params.dim != 2:
        raise ValueError(
            f"2-D export needs a dim=2 model (got dim={params.dim}); "
            "train one specifically for visualization"
        )
    c = curvature(params, spec, p, t) if not spec.dot_product else \
        float(_softplus(params.rel_curv[p] * params.time_curv[t]))
    points = geometry.exp0(params.entity_emb, float(c))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "x", "y"])
        for name, (x, y) in zip(vocab.entities, points):
            writer.writerow([name, f"{x:.17g}", f"{y:.17g}"])
    return len(points)
