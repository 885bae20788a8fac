"""Forward pass: curvature, subject transform, attention, query, scoring.

The batched entry points accept parameter containers whose fields are
either ndarrays (evaluation) or autodiff Tensors (training); everything
downstream broadcasts. Candidate scores are computed from the three
scalar invariants |Q|^2, |o|^2 and <Q, o>, which collapses the per
candidate work for ranking to one matrix product.
"""

from __future__ import annotations

import numpy as np

from . import geometry
from .autodiff import (artanh, clip, expand_dims, reduce_sum, sigmoid, softplus,
                       sqrt, tanh, value_of)
from .params import CurvatureSpec, ModelParams

_TINY = 1e-30


def _block_angles(row_params):
    """Pair consecutive entries of an n-vector into n/2 block angles.

    Each 2x2 Givens block consumes the sum of its two stored parameters,
    keeping the Table-1 style n-per-relation accounting while feeding the
    n/2-angle block structure.
    """
    return row_params[..., 0::2] + row_params[..., 1::2]


def curvature(params, spec: CurvatureSpec, p, t, s=None, o=None):
    """Positive manifold curvature for one (or a batch of) queries.

    relation:           softplus(mu_p)
    relation-time:      softplus(mu_p * tau_t)
    + dot product:      softplus(mu_p * tau_t * <e_s, e_o>)
    """
    mu = params.rel_curv[p]
    z = mu
    if spec.time_curvature:
        if params.time_curv is None:
            raise ValueError("spec requires per-timestamp curvature but time_curv is absent")
        z = z * params.time_curv[t]
    if spec.dot_product:
        if s is None or o is None:
            raise ValueError("dot-product curvature needs subject and object ids")
        dot = reduce_sum(params.entity_emb[s] * params.entity_emb[o], axis=-1)
        z = z * dot
    return softplus(z)


def _batched_curvature(params, spec, s_ids, p_ids, t_ids, cand_ids):
    """Curvature broadcastable against (B, K) candidate scores.

    Shape (B, 1) unless the dot-product term makes it candidate-dependent,
    in which case it is (B, K).
    """
    mu = params.rel_curv[p_ids]
    z = mu
    if spec.time_curvature:
        if params.time_curv is None:
            raise ValueError("spec requires per-timestamp curvature but time_curv is absent")
        z = z * params.time_curv[t_ids]
    if spec.dot_product:
        e_s = params.entity_emb[s_ids]
        e_c = params.entity_emb[cand_ids]
        dot = reduce_sum(expand_dims(e_s, 1) * e_c, axis=-1)  # (B, K)
        z = expand_dims(z, 1) * dot
        return softplus(z)
    return expand_dims(softplus(z), 1)


def _query_points(params, spec, s_ids, p_ids, t_ids, c):
    """Query embeddings Q with trailing shape (..., n).

    `c` broadcasts against (B, Kc) where Kc is 1 for query-level curvature
    and K when the curvature is candidate-dependent.
    """
    cK = expand_dims(c, -1)                        # (B, Kc, 1)
    e_s = expand_dims(params.entity_emb[s_ids], 1)  # (B, 1, n)
    e_s_h = geometry.exp0(e_s, cK)                 # (B, Kc, n)

    theta = expand_dims(_block_angles(params.rel_rot[p_ids]), 1)
    phi = expand_dims(_block_angles(params.rel_ref[p_ids]), 1)
    q_rot = geometry.givens_rotate(e_s_h, theta)
    q_ref = geometry.givens_reflect(e_s_h, phi)

    ctx = expand_dims(params.rel_ctx[p_ids], 1)
    log_rot = geometry.log0(q_rot, cK)
    log_ref = geometry.log0(q_ref, cK)
    a_rot = reduce_sum(ctx * log_rot, axis=-1)     # (B, Kc)
    a_ref = reduce_sum(ctx * log_ref, axis=-1)
    w_rot = sigmoid(a_rot - a_ref)                 # two-way softmax
    attended = geometry.exp0(
        expand_dims(w_rot, -1) * log_rot + expand_dims(1.0 - w_rot, -1) * log_ref, cK
    )

    r_h = geometry.exp0(expand_dims(params.rel_emb[p_ids], 1), cK)
    q = geometry.mobius_add(attended, r_h, cK)
    if spec.time_translation:
        if params.time_trans is None:
            raise ValueError("spec requires time translation but time_trans is absent")
        trans_h = geometry.exp0(expand_dims(params.time_trans[t_ids], 1), cK)
        q = geometry.mobius_add(q, trans_h, cK)
    return q


def _sq_distance_from_parts(qq, oo, qo, c):
    """Squared hyperbolic distance d(Q, y)^2 from |Q|^2, |y|^2, <Q, y>.

    Expands |(-Q) (+)_c y|^2 in the three invariants, so candidate scoring
    never materializes per-candidate difference vectors.
    """
    a = 1.0 - 2.0 * c * qo + c * oo
    b = 1.0 - c * qq
    den = 1.0 - 2.0 * c * qo + (c * c) * qq * oo
    m2 = (a * a * qq - 2.0 * a * b * qo + b * b * oo) / (den * den)
    nrm = sqrt(clip(m2, lo=_TINY))
    arg = clip(sqrt(c) * nrm, hi=1.0 - geometry.BALL_EPS)
    dist = (2.0 / sqrt(c)) * artanh(arg)
    return dist * dist


def score_candidates_batch(params, spec, s_ids, p_ids, t_ids, cand_ids):
    """Scores (B, K): one query per row, candidate objects along columns.

    Q is computed once per (s, p, t) unless the dot-product curvature
    makes the manifold candidate-dependent.
    """
    c = _batched_curvature(params, spec, s_ids, p_ids, t_ids, cand_ids)
    q = _query_points(params, spec, s_ids, p_ids, t_ids, c)

    e_c = params.entity_emb[cand_ids]                       # (B, K, n)
    o_norm2 = reduce_sum(e_c * e_c, axis=-1)                # (B, K)
    o_norm = sqrt(clip(o_norm2, lo=_TINY))
    o_scale = tanh(sqrt(c) * o_norm) / (sqrt(c) * o_norm)   # exp0 radial factor
    qq = reduce_sum(q * q, axis=-1)                         # (B, Kc)
    oo = (o_scale * o_scale) * o_norm2
    qo = o_scale * reduce_sum(q * e_c, axis=-1)

    sq_dist = _sq_distance_from_parts(qq, oo, qo, c)
    b_s = expand_dims(params.entity_bias[s_ids], 1)
    b_o = params.entity_bias[cand_ids]
    return -sq_dist + b_s + b_o


def query_embedding(params: ModelParams, spec: CurvatureSpec, s: int, p: int, t: int,
                    o: int | None = None):
    """Query point and curvature for a single (s, p, t) triple.

    The dot-product variant needs the object id because the curvature
    depends on it.
    """
    if spec.dot_product and o is None:
        raise ValueError("dot-product curvature needs the object id to define the manifold")
    c = curvature(params, spec, np.array([p]), np.array([t]),
                  s=np.array([s]), o=None if o is None else np.array([o]))
    q = _query_points(params, spec, np.array([s]), np.array([p]), np.array([t]), c[:, None])
    return value_of(q)[0, 0], float(value_of(c)[0])


def score(params: ModelParams, spec: CurvatureSpec, s: int, p: int, o: int, t: int) -> float:
    """-d^c(Q(s, p[, t]), exp0(e_o))^2 + b_s + b_o; higher is more plausible."""
    out = score_candidates_batch(
        params, spec, np.array([s]), np.array([p]), np.array([t]), np.array([[o]])
    )
    return float(value_of(out)[0, 0])


def score_candidates(params: ModelParams, spec: CurvatureSpec, s: int, p: int, t: int,
                     candidates) -> np.ndarray:
    """Vector of scores for one query against an ordered candidate list."""
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        raise ValueError("candidate list must be non-empty")
    out = score_candidates_batch(
        params, spec, np.array([s]), np.array([p]), np.array([t]), candidates[None, :]
    )
    return value_of(out)[0]


def score_all_objects(params: ModelParams, spec: CurvatureSpec,
                      s_ids, p_ids, t_ids, n_entities: int,
                      dot_chunk: int = 16) -> np.ndarray:
    """Scores of every entity as object for a batch of queries, shape (B, |E|).

    Fast path (query-level curvature): Q per query plus one GEMM against
    the entity table. The dot-product variant falls back to candidate
    batched scoring in small chunks since each candidate redefines the
    manifold.
    """
    s_ids = np.asarray(s_ids, dtype=np.int64)
    p_ids = np.asarray(p_ids, dtype=np.int64)
    t_ids = np.asarray(t_ids, dtype=np.int64)
    all_objects = np.arange(n_entities, dtype=np.int64)
    if spec.dot_product:
        rows = []
        for lo in range(0, len(s_ids), dot_chunk):
            sl = slice(lo, lo + dot_chunk)
            cand = np.broadcast_to(all_objects, (len(s_ids[sl]), n_entities))
            rows.append(value_of(score_candidates_batch(
                params, spec, s_ids[sl], p_ids[sl], t_ids[sl], cand)))
        return np.concatenate(rows, axis=0)

    c = value_of(_batched_curvature(params, spec, s_ids, p_ids, t_ids, None))  # (B, 1)
    q = value_of(_query_points(params, spec, s_ids, p_ids, t_ids, c))[:, 0, :]  # (B, n)

    ent = params.entity_emb
    o_norm2 = np.sum(ent * ent, axis=-1)[None, :]            # (1, |E|)
    o_norm = np.sqrt(np.maximum(o_norm2, _TINY))
    sc = np.sqrt(c)
    o_scale = np.tanh(sc * o_norm) / (sc * o_norm)           # (B, |E|)
    qq = np.sum(q * q, axis=-1)[:, None]
    oo = (o_scale * o_scale) * o_norm2
    qo = o_scale * (q @ ent.T)
    sq_dist = _sq_distance_from_parts(qq, oo, qo, c)
    return -sq_dist + params.entity_bias[s_ids][:, None] + params.entity_bias[None, :]
