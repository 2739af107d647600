"""Dense linear algebra helpers.

Vectors and matrices are plain float64 numpy arrays. The helpers here
validate shapes and finiteness at the boundary and provide the spectral
quantities the step-size rules need.
"""

from collections import namedtuple

import numpy as np

from .errors import DimensionError, EmptyInput, NonFiniteError

PowerResult = namedtuple("PowerResult", ["value", "converged", "n_iter"])


def as_vector(v, name="vector"):
    """Return `v` as a finite 1-d float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return arr


def as_matrix(M, name="matrix"):
    """Return `M` as a finite 2-d float64 array."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return arr


def matvec(M, v):
    """Compute ``M @ v`` with a dimension check."""
    if v.shape[0] != M.shape[1]:
        raise DimensionError(
            f"matvec: matrix has {M.shape[1]} columns, vector has {v.shape[0]} entries")
    return M @ v


def matvec_t(M, v):
    """Compute ``M.T @ v`` with a dimension check."""
    if v.shape[0] != M.shape[0]:
        raise DimensionError(
            f"matvec_t: matrix has {M.shape[0]} rows, vector has {v.shape[0]} entries")
    return M.T @ v


def lambda_max_gram(M, tol=1e-10, max_iter=10_000, return_info=False):
    """Largest eigenvalue of ``M.T @ M`` by power iteration.

    The start vector is the normalized all-ones vector, so the result is
    deterministic. Iteration stops once the relative change of the Rayleigh
    quotient drops below `tol` or after `max_iter` products.

    Parameters
    ----------
    M : ndarray, shape (s, d)
    tol : float
        Relative stopping tolerance, must be positive.
    max_iter : int
    return_info : bool
        If True return a ``PowerResult(value, converged, n_iter)``.

    Returns
    -------
    float or PowerResult
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0 or not np.any(M):
        res = PowerResult(0.0, True, 0)
        return res if return_info else 0.0

    d = M.shape[1]
    v = np.full(d, 1.0 / np.sqrt(d))
    # all-ones can be orthogonal to the top eigenvector; fall back to a seeded start
    if np.linalg.norm(M @ v) < 1e-14 * np.linalg.norm(M):
        v = np.random.default_rng(0).standard_normal(d)
        v /= np.linalg.norm(v)

    lam = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = M.T @ (M @ v)
        lam_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            lam = 0.0
            converged = True
            break
        v = w / nrm
        if lam_new > 0 and abs(lam_new - lam) < tol * lam_new:
            lam = lam_new
            converged = True
            break
        lam = lam_new
    res = PowerResult(lam, converged, it)
    return res if return_info else lam


def block_lambda_bound(blocks, form="max", tol=1e-10, max_iter=10_000):
    """Upper bound on ``lambda_max(A.T A)`` from per-block spectra.

    For ``A = [A_1 ... A_n]`` the block bound gives
    ``lambda_max(A.T A) <= sum_i lambda_max(A_i.T A_i) <= n * max_i lambda_max(A_i.T A_i)``.

    Parameters
    ----------
    blocks : list of ndarray
        Column blocks sharing the same row count.
    form : {"max", "sum"}
        ``"max"`` returns ``n * max_i lambda_i``; ``"sum"`` returns
        ``n * sum_i lambda_i``, the looser bound used when only the sum of
        local spectra is shared.
    """
    if len(blocks) == 0:
        raise EmptyInput("block_lambda_bound needs at least one block")
    rows = {B.shape[0] for B in blocks}
    if len(rows) != 1:
        raise DimensionError(f"blocks have different row counts: {sorted(rows)}")
    lams = [lambda_max_gram(B, tol=tol, max_iter=max_iter) for B in blocks]
    n = len(blocks)
    if form == "max":
        return n * max(lams)
    if form == "sum":
        return n * sum(lams)
    raise ValueError(f"unknown form {form!r}")
