"""Planted-partition graphs with Gaussian node features."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .graph import SparseGraph
from .spectral import ClusterPartition


@dataclass(frozen=True)
class SbmSpec:
    n: int = 300
    m: int = 3
    p_in: float = 0.1
    p_out: float = 0.01
    d: int = 8
    mu_sep: float = 1.0
    sigma: float = 0.7
    seed: int = 0

    def validate(self):
        if self.m < 1 or self.n < self.m:
            raise ValidationError(f"need 1 <= m <= n, got n={self.n}, m={self.m}")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {p}")
        if self.d < self.m:
            raise ValidationError(f"feature dimension d={self.d} must be >= m={self.m}")
        if self.sigma < 0 or self.mu_sep < 0:
            raise ValidationError("sigma and mu_sep must be nonnegative")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")

    def to_json(self) -> str:
        return json.dumps({"rng": "numpy.PCG64", **asdict(self)}, indent=2, sort_keys=True)


def block_labels(n: int, m: int) -> np.ndarray:
    """``n // m`` nodes per block, remainder appended to the last block."""
    size = n // m
    labels = np.minimum(np.arange(n) // size, m - 1)
    return labels.astype(np.int64)


def block_centers(m: int, d: int, mu_sep: float) -> np.ndarray:
    """Scaled simplex vertices ``e_i * mu_sep / sqrt(2)``: all pairwise distances equal ``mu_sep``."""
    centers = np.zeros((m, d))
    centers[np.arange(m), np.arange(m)] = mu_sep / np.sqrt(2.0)
    return centers


def gen_sbm(spec: SbmSpec) -> tuple[SparseGraph, np.ndarray, ClusterPartition]:
    """Sample graph, features and ground truth from one PCG64 stream.

    Draw order: one uniform per node pair ``i < j`` in row-major order, then
    the ``n x d`` feature noise.
    """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    labels = block_labels(spec.n, spec.m)
    iu, ju = np.triu_indices(spec.n, k=1)
    prob = np.where(labels[iu] == labels[ju], spec.p_in, spec.p_out)
    keep = rng.random(iu.size) < prob
    rows, cols = iu[keep], ju[keep]
    a = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(spec.n, spec.n))
    a = (a + a.T).tocsr()
    a.sort_indices()
    g = SparseGraph(a)
    x = block_centers(spec.m, spec.d, spec.mu_sep)[labels] + spec.sigma * rng.standard_normal((spec.n, spec.d))
    return g, x, ClusterPartition(labels, spec.m)
