import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reflexsim.matrix import (
    NormKind,
    ZeroRowWarning,
    apply_permutation,
    column_normalize,
    frobenius_norm,
    invert_permutation,
    matrix_vector_norm,
    permute_symmetric,
    row_normalize,
    validate_adjacency,
)

finite = st.floats(0, 1e3, allow_nan=False, allow_infinity=False)
adjacency = st.tuples(st.integers(1, 7), st.integers(1, 7)).flatmap(
    lambda s: arrays(np.float64, s, elements=finite)
)


def test_row_normalize_examples():
    np.testing.assert_array_equal(row_normalize([[2.0, 2.0], [0.0, 4.0]]), [[0.5, 0.5], [0, 1]])
    np.testing.assert_array_equal(row_normalize(np.eye(4)), np.eye(4))


def test_zero_row_warns_and_stays_zero():
    with pytest.warns(ZeroRowWarning):
        out, zero = row_normalize([[0.0, 0.0], [1.0, 3.0]], return_zero_rows=True)
    np.testing.assert_array_equal(out, [[0, 0], [0.25, 0.75]])
    assert zero.tolist() == [True, False]


@pytest.mark.parametrize("bad", [[[1.0, np.nan]], [[np.inf, 1.0]], [[-1.0, 2.0]], [1.0, 2.0], np.zeros((0, 3))])
def test_validation_rejects(bad):
    with pytest.raises(ValueError):
        validate_adjacency(bad)


def test_sparse_normalize_matches_dense(rng):
    A = rng.random((6, 9)) * (rng.random((6, 9)) < 0.4)
    A[2] = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroRowWarning)
        dense = row_normalize(A)
        sparse = row_normalize(sp.csr_matrix(A))
    assert sp.issparse(sparse)
    np.testing.assert_allclose(sparse.toarray(), dense, rtol=0, atol=1e-15)


def test_column_normalize_shape():
    A = np.array([[1.0, 0.0, 2.0], [3.0, 0.0, 2.0]])
    with pytest.warns(ZeroRowWarning):
        C = column_normalize(A)
    assert C.shape == (3, 2)
    np.testing.assert_allclose(C, [[0.25, 0.75], [0, 0], [0.5, 0.5]])


@given(adjacency)
def test_row_normalize_properties(A):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroRowWarning)
        out, zero = row_normalize(A, return_zero_rows=True)
    assert np.all((out >= 0) & (out <= 1))
    sums = out.sum(axis=1)
    np.testing.assert_allclose(sums[~zero], 1.0, atol=1e-12)
    assert np.all(out[zero] == 0)


@pytest.mark.parametrize("kind,expected", [("l2", 5.0), ("l1", 7.0), ("linf", 4.0)])
def test_norm_examples(kind, expected):
    assert matrix_vector_norm([[3.0, 4.0]], kind) == expected


def test_frobenius_examples():
    assert frobenius_norm(np.zeros((3, 3))) == 0
    assert frobenius_norm(np.eye(3)) == pytest.approx(math.sqrt(3), abs=1e-15)
    assert frobenius_norm([[1.0, 2.0], [2.0, 1.0]]) == pytest.approx(math.sqrt(10), abs=1e-15)


def test_norm_rejects_nan_and_parses_kind():
    with pytest.raises(ValueError):
        matrix_vector_norm([[np.nan]])
    with pytest.raises(ValueError):
        NormKind.parse("l3")
    assert NormKind.parse("LINF") is NormKind.LINF


def test_l2_no_overflow():
    assert matrix_vector_norm([[1e200, 1e200]], "l2") == pytest.approx(math.sqrt(2) * 1e200)


@given(arrays(np.float64, (4, 5), elements=st.floats(-1e3, 1e3)), st.randoms())
@settings(max_examples=50)
def test_norm_order_and_permutation_invariance(M, r):
    l1, l2, linf = (matrix_vector_norm(M, k) for k in ("l1", "l2", "linf"))
    assert linf <= l2 * (1 + 1e-12) and l2 <= l1 * (1 + 1e-12)
    p, q = np.array(r.sample(range(4), 4)), np.array(r.sample(range(5), 5))
    # correctly rounded sums do not depend on the entry order
    for k in ("l1", "l2", "linf"):
        assert matrix_vector_norm(apply_permutation(M, p, q), k) == matrix_vector_norm(M, k)


def test_permutation_examples(rng):
    M = rng.random((5, 7))
    np.testing.assert_array_equal(apply_permutation(M, np.arange(5), np.arange(7)), M)
    np.testing.assert_array_equal(apply_permutation(np.eye(2), [1, 0], [0, 1]), [[0, 1], [1, 0]])
    p, q = rng.permutation(5), rng.permutation(7)
    back = apply_permutation(apply_permutation(M, p, q), invert_permutation(p), invert_permutation(q))
    np.testing.assert_array_equal(back, M)


def test_permutation_placement(rng):
    M = rng.random((4, 3))
    p, q = rng.permutation(4), rng.permutation(3)
    out = apply_permutation(M, p, q)
    for i in range(4):
        for j in range(3):
            assert out[p[i], q[j]] == M[i, j]


def test_permutation_sparse_and_errors(rng):
    M = sp.random(6, 4, density=0.5, random_state=1, format="csr")
    p, q = rng.permutation(6), rng.permutation(4)
    np.testing.assert_array_equal(apply_permutation(M, p, q).toarray(), apply_permutation(M.toarray(), p, q))
    with pytest.raises(ValueError):
        apply_permutation(M, np.arange(5), q)
    with pytest.raises(ValueError):
        apply_permutation(M, np.array([0, 0, 1, 2, 3, 4]), q)


def test_permute_symmetric_keeps_symmetry(rng):
    S = rng.random((6, 6))
    S = S + S.T
    P = permute_symmetric(S, rng.permutation(6))
    np.testing.assert_array_equal(P, P.T)
