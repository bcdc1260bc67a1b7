"""Shared numerical helpers: SVD rank, min-norm least squares, null spaces."""

from typing import Optional, Tuple

import numpy as np

EPS = np.finfo(float).eps


def default_rank_tol(M: np.ndarray, svals: Optional[np.ndarray] = None) -> float:
    """Relative SVD threshold ``max(rows, cols) * sigma_max * eps``."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0.0
    if svals is None:
        svals = np.linalg.svd(M, compute_uv=False)
    smax = svals[0] if svals.size else 0.0
    return max(M.shape) * smax * EPS


def numerical_rank(M: np.ndarray, tol: Optional[float] = None) -> Tuple[int, float]:
    """Return ``(rank, tol)`` where rank counts singular values above ``tol``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0, 0.0 if tol is None else float(tol)
    svals = np.linalg.svd(M, compute_uv=False)
    if tol is None:
        tol = default_rank_tol(M, svals)
    return int(np.sum(svals > tol)), float(tol)


def lstsq_min_norm(A: np.ndarray, b: np.ndarray, rcond: Optional[float] = None,
                   residual: bool = True):
    """Minimum-norm least-squares solution of ``A x = b``.

    Returns ``(x, residual_norm, rank)``. ``b`` may be a vector or a matrix of
    right-hand sides, in which case the residual is the Frobenius norm. With
    ``residual=False`` the norm is skipped and reported as ``nan``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        shape = (A.shape[1],) + b.shape[1:]
        return np.zeros(shape), 0.0, 0
    x, _, rank, _ = np.linalg.lstsq(A, b, rcond=rcond)
    res = float(np.linalg.norm(A @ x - b)) if residual else float("nan")
    return x, res, int(rank)


def null_space(M: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    ncols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(ncols)
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    if tol is None:
        tol = default_rank_tol(M, s)
    rank = int(np.sum(s > tol))
    return vh[rank:].T.copy()


def as_sequence(w, name: str = "w") -> np.ndarray:
    """Coerce a vector sequence to a ``(T, q)`` float array.

    A 1-D input is read as a scalar sequence (q = 1).
    """
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a (T, q) array or a 1-D sequence")
    return arr
