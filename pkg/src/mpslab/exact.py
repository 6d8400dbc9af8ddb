"""Closed-form ridge regression in the full f^N product-feature space.

Stationarity of the regularized squared loss gives the linear system
A w = b with A = lambda*I + (1/T) sum_i phi_i phi_i^T and
b = (1/T) sum_i y_i phi_i over row-major-flattened feature tensors.
Solving it by LU and compressing the reshaped solution by sequential SVDs
yields the "inversion and compression" training method.
"""

from dataclasses import dataclass

import numpy as np

from .datagen import Dataset
from .errors import CapacityError
from .features import FeatureMap, featurize_batch
from .mps import MPS, compress
from .tensor import solve_linear

DESIGN_GUARD = 10**4


@dataclass(frozen=True)
class DesignSystem:
    """Normal-equations system for the full weight tensor."""

    a: np.ndarray  # (f^N, f^N), symmetric positive definite
    b: np.ndarray  # (f^N,)
    ridge: float
    n_samples: int
    shape: tuple  # (f, ..., f) of the weight tensor


def design_matrix(phi: np.ndarray) -> np.ndarray:
    """Rows are the row-major flattened feature tensors, shape (T, f^N)."""
    t = phi.shape[0]
    z = np.ones((t, 1))
    for j in range(phi.shape[1]):
        z = (z[:, :, None] * phi[:, j, None, :]).reshape(t, -1)
    return z


def build_design_system(d: Dataset, fmap: FeatureMap, ridge: float) -> DesignSystem:
    """Assemble A and b from a dataset; guarded to f^N <= 10^4."""
    if ridge <= 0.0:
        raise ValueError(f"ridge coefficient must be > 0, got {ridge}")
    n = d.n_features
    dim = fmap.dim**n
    if dim > DESIGN_GUARD:
        raise CapacityError(f"design matrix would be {dim} x {dim}")
    z = design_matrix(featurize_batch(fmap, d.features))
    t = d.n_samples
    a = (z.T @ z) / t
    a[np.diag_indices_from(a)] += ridge
    b = z.T @ d.labels / t
    return DesignSystem(a=a, b=b, ridge=ridge, n_samples=t,
                        shape=(fmap.dim,) * n)


def solve_full_weight(system: DesignSystem) -> np.ndarray:
    """LU-solve A w = b and reshape w to the (f, ..., f) weight tensor."""
    w = solve_linear(system.a, system.b)
    return w.reshape(system.shape)


def inversion_and_compression(d: Dataset, fmap: FeatureMap, ridge: float,
                              max_bond: int) -> MPS:
    """Exact ridge solution compressed to the requested bond dimension."""
    full = solve_full_weight(build_design_system(d, fmap, ridge))
    w, _ = compress(full, max_bond)
    return w


def prediction_loss(w: MPS, d: Dataset, fmap: FeatureMap) -> float:
    """Half mean squared prediction error (no ridge term)."""
    pred = w.evaluate_batch(featurize_batch(fmap, d.features))
    return float(0.5 * np.mean((pred - d.labels) ** 2))
