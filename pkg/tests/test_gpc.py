import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgeig.gpc import (
    HERMITE,
    LEGENDRE,
    GpcBasis,
    eval_univariate,
    hermite_triple_closed_form,
    multi_indices,
    n_terms,
    triple_product_tensor,
)
from sgeig.quadrature import tensor_grid


def test_hermite_at_origin_odd_terms_vanish():
    b = GpcBasis.create(HERMITE, 3, 4)
    v = b.eval(np.zeros(3))
    assert v[0] == 1.0
    odd = b.total_degrees % 2 == 1
    assert np.all(v[odd] == 0.0)


def test_hermite_one_variable_at_one():
    b = GpcBasis.create(HERMITE, 1, 2)
    np.testing.assert_allclose(b.eval(np.array([1.0])), [1.0, 1.0, 0.0], atol=1e-15)


def test_legendre_one_variable_at_one():
    b = GpcBasis.create(LEGENDRE, 1, 1)
    np.testing.assert_allclose(b.eval(np.array([1.0])), [1.0, math.sqrt(3.0)], rtol=1e-15)


def test_index_order_within_degree():
    idx = multi_indices(3, 2)
    assert idx[0] == (0, 0, 0)
    assert idx[1:4] == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert idx[4] == (2, 0, 0)
    assert idx[7] == (0, 2, 0)
    assert idx[9] == (0, 0, 2)


@given(st.integers(1, 5), st.integers(0, 5))
def test_degree_block_count_identity(m, d):
    b = GpcBasis.create(HERMITE, m, d)
    count = int(np.sum(b.total_degrees == d))
    assert count == n_terms(m, d) - n_terms(m, d - 1)
    if d >= 1:
        assert count == math.comb(m + d - 1, d)
    blk = b.block_ranges()[d]
    assert blk.stop - blk.start == count
    assert np.all(b.total_degrees[blk] == d)


def test_block_ranges_tile_basis():
    b = GpcBasis.create(HERMITE, 3, 3)
    blocks = b.block_ranges()
    assert blocks[0] == slice(0, 1)
    assert blocks[-1].stop == b.size == 20
    for a, c in zip(blocks, blocks[1:]):
        assert a.stop == c.start


@pytest.mark.parametrize("family", [HERMITE, LEGENDRE])
@pytest.mark.parametrize("m,p", [(1, 5), (2, 3), (3, 3)])
def test_orthonormal_by_quadrature(family, m, p):
    b = GpcBasis.create(family, m, p)
    grid = tensor_grid(family, m, p + 1)
    psi = b.eval(grid.points)
    gram = psi.T @ (grid.weights[:, None] * psi)
    np.testing.assert_allclose(gram, np.eye(b.size), atol=1e-10)


def test_eval_rejects_bad_input():
    b = GpcBasis.create(LEGENDRE, 2, 2)
    with pytest.raises(ValueError):
        b.eval(np.zeros(3))
    with pytest.raises(ValueError):
        b.eval(np.array([1.5, 0.0]))
    with pytest.raises(ValueError):
        GpcBasis.create("chebyshev", 2, 2)


def test_eval_batch_matches_single():
    b = GpcBasis.create(HERMITE, 2, 3)
    pts = np.random.default_rng(1).standard_normal((5, 2))
    batch = b.eval(pts)
    for q in range(5):
        np.testing.assert_allclose(batch[q], b.eval(pts[q]), rtol=1e-14)


@pytest.mark.parametrize("family", [HERMITE, LEGENDRE])
def test_tensor_first_slice_is_identity(family):
    b = GpcBasis.create(family, 2, 3)
    t = triple_product_tensor(GpcBasis.create(family, 2, 6), b)
    np.testing.assert_allclose(t.slice(0), np.eye(b.size), atol=1e-13)


def test_benchmark_tensor_nonzeros():
    b = GpcBasis.create(HERMITE, 3, 3)
    t = triple_product_tensor(GpcBasis.create(HERMITE, 3, 6), b)
    assert (t.n_a, t.n_xi) == (84, 20)
    assert t.nnz == 806


def test_hermite_triple_degree_one_one_two():
    b = GpcBasis.create(HERMITE, 1, 2)
    t = triple_product_tensor(b, b)
    assert t.dense[2, 1, 1] == pytest.approx(math.sqrt(2.0), rel=1e-14)
    assert hermite_triple_closed_form(1, 1, 2) == pytest.approx(math.sqrt(2.0), rel=1e-15)


@settings(max_examples=40)
@given(st.integers(0, 6), st.integers(0, 3), st.integers(0, 3))
def test_hermite_triples_match_closed_form(i, j, k):
    ba = GpcBasis.create(HERMITE, 1, 6)
    bs = GpcBasis.create(HERMITE, 1, 3)
    t = triple_product_tensor(ba, bs)
    assert t.dense[i, j, k] == pytest.approx(hermite_triple_closed_form(i, j, k), abs=1e-12)


def test_tensor_symmetry_exact():
    b = GpcBasis.create(LEGENDRE, 3, 3)
    t = triple_product_tensor(GpcBasis.create(LEGENDRE, 3, 6), b)
    D = t.dense
    assert np.array_equal(D, D.transpose(0, 2, 1))


def test_multivariate_triple_is_product_of_univariate():
    ba = GpcBasis.create(HERMITE, 2, 4)
    bs = GpcBasis.create(HERMITE, 2, 2)
    t = triple_product_tensor(ba, bs)
    for ell, k, j in [(5, 3, 4), (3, 1, 1), (12, 5, 5), (7, 4, 3)]:
        a, c, e = ba.indices[ell], bs.indices[k], bs.indices[j]
        want = np.prod([hermite_triple_closed_form(a[q], c[q], e[q]) for q in range(2)])
        assert t.dense[ell, k, j] == pytest.approx(want, abs=1e-13)


def test_stacked_layout():
    b = GpcBasis.create(HERMITE, 2, 2)
    t = triple_product_tensor(GpcBasis.create(HERMITE, 2, 4), b)
    S = t.stacked(4).toarray()
    for ell in range(4):
        np.testing.assert_array_equal(S[ell * b.size : (ell + 1) * b.size], t.dense[ell].T)


def test_tensor_rejects_mismatched_bases():
    with pytest.raises(ValueError):
        triple_product_tensor(GpcBasis.create(HERMITE, 2, 4), GpcBasis.create(LEGENDRE, 2, 2))
    with pytest.raises(ValueError):
        triple_product_tensor(GpcBasis.create(HERMITE, 2, 1), GpcBasis.create(HERMITE, 2, 2))


def test_n_terms():
    assert n_terms(3, 3) == 20
    assert n_terms(3, 6) == 84
    assert n_terms(3, 2) == 10
    assert n_terms(3, -1) == 0


def test_univariate_shape():
    x = np.linspace(-1, 1, 7).reshape(7, 1)
    assert eval_univariate(LEGENDRE, x, 3).shape == (4, 7, 1)
