"""Dense multi-way array arithmetic: contraction, truncated SVD, linear solve.

Tensors are plain float64 numpy arrays in C (row-major) order; every other
module builds on the three operations here.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, SingularMatrixError


@dataclass(frozen=True)
class SvdResult:
    """Truncated SVD m ~ left_factor @ diag(singular_values) @ right_factor.

    ``discarded_weight`` is the sum of squares of the dropped singular
    values, i.e. the squared Frobenius error of the reconstruction.
    """

    left_factor: np.ndarray
    singular_values: np.ndarray
    right_factor: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.singular_values)


def contract(a: np.ndarray, b: np.ndarray, pairs) -> np.ndarray:
    """Contract tensor ``a`` with tensor ``b`` over the given axis pairs.

    ``pairs`` is a sequence of (axis-of-a, axis-of-b) tuples.  The result
    carries the free axes of ``a`` followed by the free axes of ``b``, each
    in their original order.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pairs = list(pairs)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise ValueError(f"repeated contraction axis in {pairs}")
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise DimensionMismatchError(
                f"axis {i} of shape {a.shape} does not match "
                f"axis {j} of shape {b.shape}"
            )
    if not pairs:
        return np.multiply.outer(a, b)
    return np.tensordot(a, b, axes=(ax_a, ax_b))


def svd_truncate(m: np.ndarray, max_rank: int, cutoff: float = 0.0) -> SvdResult:
    """SVD of matrix ``m`` keeping at most ``max_rank`` singular triples.

    Singular values with sigma_k^2 <= cutoff * sum(sigma^2) are dropped as
    well (cutoff=0 drops only exact zeros).  At least one triple is always
    retained so downstream bond extents stay >= 1.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got shape {m.shape}")
    if max_rank < 1:
        raise ValueError(f"max_rank must be >= 1, got {max_rank}")
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("matrix has non-finite entries")

    u, s, vt = np.linalg.svd(m, full_matrices=False)
    weights = s**2
    total = weights.sum()
    keep = int(np.count_nonzero(weights > cutoff * total))
    rank_tol = max(m.shape) * np.finfo(np.float64).eps * (s[0] if len(s) else 0.0)
    keep = min(keep, int(np.count_nonzero(s > rank_tol)))
    keep = max(1, min(keep, max_rank))
    discarded = float(weights[keep:].sum())
    return SvdResult(
        left_factor=u[:, :keep],
        singular_values=s[:keep],
        right_factor=vt[:keep, :],
        discarded_weight=discarded,
    )


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ w = b for a square matrix ``a`` via LU factorization."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got {a.shape}")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"matrix is {a.shape} but right-hand side has length {b.shape[0]}"
        )
    with warnings.catch_warnings():
        # scipy warns on an exactly-zero pivot; we raise instead
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    if np.any(np.diag(lu) == 0.0):
        raise SingularMatrixError("exactly singular matrix in LU factorization")
    return scipy.linalg.lu_solve((lu, piv), b)
