"""Forward-pass semantics checked against a composed-geometry reference."""

import numpy as np
import pytest
from scipy.special import softmax

from conftest import small_params
from hercules import geometry
from hercules.model import (curvature, query_embedding, score,
                            score_all_objects, score_candidates,
                            score_candidates_batch)
from hercules.params import CurvatureSpec

ALL_SPECS = [CurvatureSpec.relation_only(), CurvatureSpec.relation_time(),
             CurvatureSpec.relation_time_translation(),
             CurvatureSpec.relation_time_dot()]


def softplus(x):
    return np.logaddexp(0.0, x)


def reference_score(params, spec, s, p, o, t):
    """Naive composition of the published pipeline, one query at a time.

    Uses the explicit two-term softmax for the attention weights and the
    Mobius-difference distance, i.e. none of the batched shortcuts.
    """
    z = params.rel_curv[p]
    if spec.time_curvature:
        z = z * params.time_curv[t]
    if spec.dot_product:
        z = z * float(params.entity_emb[s] @ params.entity_emb[o])
    c = float(softplus(z))

    e_s = geometry.exp0(params.entity_emb[s], c)
    theta = params.rel_rot[p][0::2] + params.rel_rot[p][1::2]
    phi = params.rel_ref[p][0::2] + params.rel_ref[p][1::2]
    log_rot = geometry.log0(geometry.givens_rotate(e_s, theta), c)
    log_ref = geometry.log0(geometry.givens_reflect(e_s, phi), c)
    a = np.array([params.rel_ctx[p] @ log_rot, params.rel_ctx[p] @ log_ref])
    w_rot, w_ref = softmax(a)
    attended = geometry.exp0(w_rot * log_rot + w_ref * log_ref, c)
    q = geometry.mobius_add(attended, geometry.exp0(params.rel_emb[p], c), c)
    if spec.time_translation:
        q = geometry.mobius_add(q, geometry.exp0(params.time_trans[t], c), c)
    d = float(geometry.hyp_distance(q, geometry.exp0(params.entity_emb[o], c), c))
    return -d * d + params.entity_bias[s] + params.entity_bias[o]


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.variant)
def test_score_matches_composed_reference(spec):
    params = small_params(spec, seed=11)
    rng = np.random.default_rng(2)
    for _ in range(12):
        s, o = rng.integers(6, size=2)
        p = rng.integers(4)
        t = rng.integers(3)
        np.testing.assert_allclose(score(params, spec, s, p, o, t),
                                   reference_score(params, spec, s, p, o, t),
                                   rtol=1e-7, atol=1e-9)


def test_curvature_forms():
    spec = CurvatureSpec.relation_time()
    params = small_params(spec, seed=4)
    p, t = 1, 2
    np.testing.assert_allclose(
        curvature(params, spec, p, t),
        softplus(params.rel_curv[p] * params.time_curv[t]), rtol=1e-15)
    np.testing.assert_allclose(
        curvature(params, CurvatureSpec.relation_only(), p, t),
        softplus(params.rel_curv[p]), rtol=1e-15)
    dot = CurvatureSpec.relation_time_dot()
    with pytest.raises(ValueError):
        curvature(params, dot, p, t)  # needs subject/object ids
    np.testing.assert_allclose(
        curvature(params, dot, p, t, s=0, o=3),
        softplus(params.rel_curv[p] * params.time_curv[t]
                 * (params.entity_emb[0] @ params.entity_emb[3])), rtol=1e-12)


def test_curvature_is_always_positive():
    spec = CurvatureSpec.relation_time()
    params = small_params(spec, seed=5)
    params.rel_curv[:] = [-30.0, 0.0, 4.0, -1.0]
    for p in range(4):
        for t in range(3):
            assert curvature(params, spec, p, t) > 0.0


def test_zero_embeddings_score_is_bias_sum():
    spec = CurvatureSpec.relation_only()
    params = small_params(spec, seed=6)
    for name in ("entity_emb", "rel_emb", "rel_ctx"):
        getattr(params, name)[...] = 0.0
    params.entity_bias[:] = np.arange(6) * 0.1
    # every point collapses to the origin, so only the biases remain
    np.testing.assert_allclose(score(params, spec, 2, 1, 5, 0),
                               0.2 + 0.5, atol=1e-12)


def test_attention_is_inert_when_branches_coincide():
    """With x = [x0, 0] per block and zero angles, rotation == reflection."""
    spec = CurvatureSpec.relation_only()
    params = small_params(spec, seed=7)
    params.entity_emb[:, 1::2] = 0.0
    params.rel_rot[...] = 0.0
    params.rel_ref[...] = 0.0
    s, p, o, t = 1, 0, 4, 0
    c = float(curvature(params, spec, p, t))
    e_s = geometry.exp0(params.entity_emb[s], c)
    q = geometry.mobius_add(e_s, geometry.exp0(params.rel_emb[p], c), c)
    d = float(geometry.hyp_distance(q, geometry.exp0(params.entity_emb[o], c), c))
    expected = -d * d + params.entity_bias[s] + params.entity_bias[o]
    np.testing.assert_allclose(score(params, spec, s, p, o, t), expected,
                               rtol=1e-9, atol=1e-12)


def test_query_point_lies_in_ball():
    for spec in ALL_SPECS:
        params = small_params(spec, seed=8)
        q, c = query_embedding(params, spec, 0, 2, 1, o=3)
        assert q.shape == (4,)
        assert np.sum(q ** 2) * c < 1.0


def test_time_unaware_scores_ignore_timestamp():
    spec = CurvatureSpec.relation_only()
    params = small_params(spec, seed=9)
    base = score_all_objects(params, spec, np.array([0, 1]), np.array([1, 2]),
                             np.array([0, 0]), 6)
    for t in (1, 2):
        other = score_all_objects(params, spec, np.array([0, 1]), np.array([1, 2]),
                                  np.array([t, t]), 6)
        np.testing.assert_array_equal(base, other)


def test_unit_time_factor_reduces_to_time_unaware():
    herc = CurvatureSpec.relation_time()
    params = small_params(herc, seed=10)
    params.time_curv[:] = 1.0
    s = np.array([0, 3])
    p = np.array([1, 3])
    t = np.array([2, 0])
    cand = np.array([[0, 1, 2], [3, 4, 5]])
    a = score_candidates_batch(params, herc, s, p, t, cand)
    b = score_candidates_batch(params, CurvatureSpec.relation_only(), s, p, t, cand)
    np.testing.assert_array_equal(a, b)  # bit-exact


def test_score_candidates_consistency():
    spec = CurvatureSpec.relation_time()
    params = small_params(spec, seed=12)
    cands = np.array([3, 1, 4, 1, 5])
    vec = score_candidates(params, spec, 0, 2, 1, cands)
    assert vec.shape == (5,)
    # duplicated candidate gets a duplicated score
    assert vec[1] == vec[3]
    for i, cand in enumerate(cands):
        np.testing.assert_allclose(vec[i], score(params, spec, 0, 2, int(cand), 1),
                                   rtol=1e-12)
    perm = np.array([4, 2, 0, 1, 3])
    np.testing.assert_array_equal(score_candidates(params, spec, 0, 2, 1, cands[perm]),
                                  vec[perm])
    with pytest.raises(ValueError):
        score_candidates(params, spec, 0, 2, 1, [])


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.variant)
def test_score_all_objects_matches_candidate_batches(spec):
    params = small_params(spec, seed=13)
    s = np.array([0, 2, 5])
    p = np.array([1, 0, 3])
    t = np.array([0, 2, 1])
    full = score_all_objects(params, spec, s, p, t, 6)
    assert full.shape == (3, 6)
    cand = np.broadcast_to(np.arange(6), (3, 6))
    direct = score_candidates_batch(params, spec, s, p, t, cand)
    np.testing.assert_allclose(full, direct, rtol=1e-9, atol=1e-12)


def test_dot_variant_requires_object_for_single_query():
    spec = CurvatureSpec.relation_time_dot()
    params = small_params(spec, seed=14)
    with pytest.raises(ValueError):
        query_embedding(params, spec, 0, 1, 2)
    q, c = query_embedding(params, spec, 0, 1, 2, o=4)
    assert c > 0.0
