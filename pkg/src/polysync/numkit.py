"""Dense linear-algebra primitives shared by all modules.

Thin, tolerance-explicit wrappers around ``numpy.linalg``: Moore-Penrose
pseudoinverse, full complex spectra, Schur-stability tests and minimum-norm
least squares. All functions validate their inputs and are pure, so values
can be shared freely across threads.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, ShapeError

# Singular values below DEFAULT_RANK_TOL * sigma_max are treated as zero.
DEFAULT_RANK_TOL = 1e-10


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a validated 2-D float64 array."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and column, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Coerce ``x`` to a validated 1-D float64 array."""
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.size < 1:
        raise ShapeError(f"{name} must be non-empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def pinv(m, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    ``tol`` is relative: singular values below ``tol * sigma_max`` are
    truncated. For a full-row-rank m this is a right inverse.
    """
    a = as_matrix(m)
    if tol < 0:
        raise ValueError(f"tol must be nonnegative, got {tol}")
    return np.linalg.pinv(a, rcond=tol)


def eigenvalues(m) -> np.ndarray:
    """Full complex spectrum of a square matrix, as a 1-D complex array."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"eigenvalues requires a square matrix, got {a.shape}")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - backend dependent
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus."""
    return float(np.max(np.abs(eigenvalues(m))))


def is_schur(m, margin: float = 0.0) -> bool:
    """True iff spectral_radius(m) < 1 - margin. ``margin`` must lie in [0, 1)."""
    if not 0.0 <= margin < 1.0:
        raise ValueError(f"margin must be in [0, 1), got {margin}")
    return spectral_radius(m) < 1.0 - margin


def solve_least_squares(a, b) -> np.ndarray:
    """Minimum-norm x minimizing ||a x - b||_F.

    ``b`` may be a vector or a matrix of stacked right-hand sides.
    """
    am = as_matrix(a, "a")
    b_arr = np.asarray(b, dtype=float)
    vector_rhs = b_arr.ndim == 1
    bm = b_arr.reshape(-1, 1) if vector_rhs else as_matrix(b_arr, "b")
    if am.shape[0] != bm.shape[0]:
        raise ShapeError(f"row mismatch: a has {am.shape[0]} rows, b has {bm.shape[0]}")
    if not np.all(np.isfinite(bm)):
        raise ValueError("b contains non-finite entries")
    x, _, _, _ = np.linalg.lstsq(am, bm, rcond=None)
    return x[:, 0] if vector_rhs else x


def lstsq_rank(a, b):
    """Like :func:`solve_least_squares` but also returns the effective rank."""
    am = as_matrix(a, "a")
    bm = as_matrix(b, "b")
    if am.shape[0] != bm.shape[0]:
        raise ShapeError(f"row mismatch: a has {am.shape[0]} rows, b has {bm.shape[0]}")
    x, _, rank, _ = np.linalg.lstsq(am, bm, rcond=None)
    return x, int(rank)
