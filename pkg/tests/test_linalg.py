import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from egvfl.errors import DimensionError, EmptyInput, NonFiniteError
from egvfl.linalg import (
    as_matrix, as_vector, block_lambda_bound, lambda_max_gram, matvec, matvec_t,
)


def test_matvec_examples():
    assert np.array_equal(matvec(np.eye(3), np.array([1.0, 2, 3])), [1, 2, 3])
    assert np.array_equal(matvec(np.zeros((2, 3)), np.full(3, 5.0)), [0, 0])
    assert np.array_equal(matvec(np.array([[1.0, 2], [3, 4]]), np.ones(2)), [3, 7])


def test_matvec_t_examples():
    assert np.array_equal(matvec_t(np.eye(3), np.array([1.0, 2, 3])), [1, 2, 3])
    assert np.array_equal(matvec_t(np.array([[1.0, 2], [3, 4]]), np.ones(2)), [4, 6])
    assert np.array_equal(matvec_t(np.zeros((2, 3)), np.ones(2)), [0, 0, 0])


def test_dimension_errors():
    with pytest.raises(DimensionError):
        matvec(np.eye(3), np.ones(2))
    with pytest.raises(DimensionError):
        matvec_t(np.eye(3), np.ones(2))
    with pytest.raises(DimensionError):
        as_vector(np.ones((2, 2)))
    with pytest.raises(DimensionError):
        as_matrix(np.ones(3))


def test_non_finite_rejected():
    with pytest.raises(NonFiniteError):
        as_vector([1.0, np.nan])
    with pytest.raises(NonFiniteError):
        as_matrix([[np.inf]])


def test_lambda_max_examples():
    assert lambda_max_gram(np.eye(4)) == pytest.approx(1.0, abs=1e-12)
    assert lambda_max_gram(np.diag([1.0, 2.0, 3.0])) == pytest.approx(9.0, rel=1e-9)
    assert lambda_max_gram(np.zeros((3, 2))) == 0.0


def test_lambda_max_against_eigensolver():
    M = np.random.default_rng(0).standard_normal((10, 6))
    oracle = np.linalg.eigvalsh(M.T @ M)[-1]
    res = lambda_max_gram(M, tol=1e-14, return_info=True)
    assert res.converged
    assert abs(res.value - oracle) <= 1e-8 * oracle


def test_lambda_max_reports_nonconvergence():
    M = np.random.default_rng(1).standard_normal((20, 20))
    res = lambda_max_gram(M, tol=1e-15, max_iter=2, return_info=True)
    assert not res.converged and res.n_iter == 2


def test_lambda_max_orthogonal_start():
    # all-ones start is orthogonal to the top eigenvector here
    M = np.array([[3.0, -3.0], [0.0, 0.0]])
    assert lambda_max_gram(M) == pytest.approx(18.0, rel=1e-9)


def test_block_bound_examples():
    rng = np.random.default_rng(2)
    blocks = [rng.standard_normal((8, k)) for k in (3, 2, 4)]
    A = np.hstack(blocks)
    exact = np.linalg.eigvalsh(A.T @ A)[-1]
    lams = [np.linalg.eigvalsh(B.T @ B)[-1] for B in blocks]
    assert block_lambda_bound(blocks) == pytest.approx(3 * max(lams), rel=1e-8)
    assert block_lambda_bound(blocks, form="sum") == pytest.approx(3 * sum(lams), rel=1e-8)
    assert exact <= sum(lams) * (1 + 1e-9)
    with pytest.raises(EmptyInput):
        block_lambda_bound([])
    with pytest.raises(DimensionError):
        block_lambda_bound([np.ones((2, 2)), np.ones((3, 2))])


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 6), st.integers(2, 6)),
              elements=st.floats(-5, 5)),
       st.integers(1, 3))
def test_block_bound_dominates_exact(M, n):
    n = min(n, M.shape[1])
    cuts = np.array_split(np.arange(M.shape[1]), n)
    blocks = [M[:, c] for c in cuts]
    exact = np.linalg.eigvalsh(M.T @ M)[-1]
    lams = [np.linalg.eigvalsh(B.T @ B)[-1] for B in blocks]
    assert exact <= sum(lams) + 1e-9 * (1 + exact)
    assert sum(lams) <= n * max(lams) + 1e-12
