"""k-order low-pass graph convolution and the normalized smoothness measure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .graph import PropagationOperator


def frequency_response(lam, k: int):
    """Response ``(1 - lam/2)**k`` of the k-order filter at frequency ``lam``.

    Works elementwise on arrays; every value must lie in ``[0, 2]``.
    """
    if k < 0:
        raise ValidationError(f"filter order must be >= 0, got {k}")
    lam_arr = np.asarray(lam, dtype=np.float64)
    if np.any(lam_arr < 0) or np.any(lam_arr > 2) or np.any(np.isnan(lam_arr)):
        raise DomainError("frequency must lie in [0, 2]")
    out = (1.0 - lam_arr / 2.0) ** k
    return float(out) if out.ndim == 0 else out


def response_table(k: int, num: int = 101) -> np.ndarray:
    """``(num, 2)`` array of ``(lam, p(lam))`` on an even grid over ``[0, 2]``."""
    grid = np.linspace(0.0, 2.0, num)
    return np.column_stack([grid, frequency_response(grid, k)])


def convolve_step(op: PropagationOperator, x: np.ndarray) -> np.ndarray:
    """One application of ``I - L_s/2``, i.e. ``(x + S x) / 2``."""
    return 0.5 * (x + op.apply(x))


def convolve_k(op: PropagationOperator, x, k: int) -> np.ndarray:
    """Apply ``(I - L_s/2)^k`` by ``k`` sparse propagations.

    Costs ``O(nnz * d * k)``. ``k = 0`` returns ``x`` itself.
    """
    if k < 0:
        raise ValidationError(f"filter order must be >= 0, got {k}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != op.n:
        raise ValidationError(f"feature matrix has {x.shape[0]} rows, graph has {op.n} nodes")
    for _ in range(k):
        x = convolve_step(op, x)
    return x


def smoothness(op: PropagationOperator, f, method: str = "quadratic") -> float:
    """Smoothness ``f' L_s f / ||f||^2`` of the normalized signal ``f / ||f||``.

    ``method="edges"`` evaluates the same quantity as a weighted sum of squared
    differences of degree-scaled values over edges; isolated nodes, on which
    ``L_s`` is the identity, add their squared value.
    """
    f = np.asarray(f, dtype=np.float64).ravel()
    if f.shape[0] != op.n:
        raise ValidationError(f"signal has length {f.shape[0]}, graph has {op.n} nodes")
    norm2 = float(f @ f)
    if norm2 == 0.0:
        raise DomainError("smoothness of the zero signal is undefined")
    if method == "quadratic":
        return float(norm2 - f @ op.apply(f)) / norm2
    if method == "edges":
        d = op.degrees
        scaled = np.zeros_like(f)
        nz = d > 0
        scaled[nz] = f[nz] / np.sqrt(d[nz])
        a = op.graph.adjacency.tocoo()
        diff = scaled[a.row] - scaled[a.col]
        total = 0.5 * float(np.sum(a.data * diff * diff)) + float(np.sum(f[~nz] ** 2))
        return total / norm2
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class SpectralOracle:
    """Dense eigendecomposition ``L_s = U diag(lam) U'`` for small graphs.

    Used as an independent reference for filtering and smoothness.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    LIMIT = 2000

    @classmethod
    def from_operator(cls, op: PropagationOperator) -> "SpectralOracle":
        if op.n > cls.LIMIT:
            raise ValidationError(f"dense oracle limited to n <= {cls.LIMIT}")
        lam, u = np.linalg.eigh(op.laplacian_dense())
        return cls(lam, u)

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T

    def coefficients(self, f) -> np.ndarray:
        """Graph Fourier coefficients ``U' f``."""
        return self.eigenvectors.T @ np.asarray(f, dtype=np.float64)

    def filter(self, x, k: int) -> np.ndarray:
        lam = np.clip(self.eigenvalues, 0.0, 2.0)
        p = frequency_response(lam, k)
        z = self.coefficients(x)
        return self.eigenvectors @ (p * z if z.ndim == 1 else p[:, None] * z)
