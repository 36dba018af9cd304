"""
Dense linear algebra for cqrsketch

Dense matrices are 2-D float64 numpy arrays. as_dense() is the construction
boundary: it copies, checks finiteness and marks the result read-only, so
values handed between modules are never mutated in place.
"""

from dataclasses import dataclass

import numpy as np

from ..utils.validation import DimensionMismatchError, NonFiniteError
from .hashing import make_rng

# Relative singular-value cutoff for pseudo-inverses and rank decisions
RCOND = 1e-10


def as_dense(values, name: str = "matrix") -> np.ndarray:
    """Validated, read-only float64 copy of a 2-D array"""
    matrix = np.array(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D (got shape {matrix.shape})")
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    matrix.flags.writeable = False
    return matrix


def _require_finite(matrix: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")


@dataclass(frozen=True)
class Spectrum:
    """Thin SVD a = U diag(s) V^T with nonincreasing s"""

    singular_values: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_basis * self.singular_values) @ self.right_basis.T

    @property
    def rank(self) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.count_nonzero(s > RCOND * s[0]))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def frobenius_sq(a: np.ndarray) -> float:
    """Sum of squared entries"""
    flat = np.asarray(a, dtype=np.float64).ravel()
    return float(flat @ flat)


def singular_values(a: np.ndarray) -> Spectrum:
    """
    Thin SVD with a deterministic sign convention.

    The first entry of each right singular vector whose magnitude exceeds
    1e-12 is made nonnegative; the matching left vector flips with it.
    """
    matrix = np.asarray(a, dtype=np.float64)
    _require_finite(matrix, "matrix")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    v = vt.T.copy()
    u = u.copy()
    for j in range(v.shape[1]):
        column = v[:, j]
        nonzero = np.flatnonzero(np.abs(column) > 1e-12)
        if nonzero.size and column[nonzero[0]] < 0:
            v[:, j] = -column
            u[:, j] = -u[:, j]
    for array in (s, u, v):
        array.flags.writeable = False
    return Spectrum(singular_values=s, left_basis=u, right_basis=v)


def solve_least_squares(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Minimum-norm minimizer of ||a M - b||_F via the SVD pseudo-inverse.

    Singular values below RCOND * sigma_1 are treated as zero, which makes
    rank-deficient designs (e.g. collapsed clusterings) deterministic.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"least squares needs matching rows (a is {a.shape}, b is {b.shape})"
        )
    _require_finite(a, "design matrix")
    _require_finite(b, "target matrix")

    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((a.shape[1], b.shape[1]))
    keep = s > RCOND * s[0]
    inverse = np.zeros_like(s)
    inverse[keep] = 1.0 / s[keep]
    return vt.T @ (inverse[:, None] * (u.T @ b))


def rho(x: np.ndarray) -> float:
    """sigma_min(x)^2 / ||x||_F^2 for a tall x; 0 when x is rank deficient"""
    x = np.asarray(x, dtype=np.float64)
    rows, cols = x.shape
    if rows < cols:
        raise DimensionMismatchError(f"rho needs a tall matrix (got {x.shape})")
    s = np.linalg.svd(x, compute_uv=False)
    total = float(np.sum(s**2))
    if total == 0.0:
        raise ValueError("rho is undefined for the zero matrix")
    smallest = s[cols - 1]
    if smallest <= RCOND * s[0]:
        return 0.0
    return float(smallest**2 / total)


def sample_gaussian(rows: int, cols: int, seed: int, *stream: int) -> np.ndarray:
    """IID N(0, 1) matrix fully determined by (seed, stream)"""
    if rows < 1 or cols < 1:
        raise ValueError(f"shape must be positive (got {rows}x{cols})")
    return make_rng(seed, *stream).standard_normal((rows, cols))


def orthonormal_columns(rows: int, cols: int, seed: int) -> np.ndarray:
    """rows x cols matrix with orthonormal columns (all singular values 1)"""
    q, r = np.linalg.qr(sample_gaussian(rows, cols, seed))
    # fix the QR sign ambiguity so the result depends on the seed only
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)
