"""Sparse undirected graphs and the normalized propagation operator.

The adjacency is held as a symmetric CSR matrix. Every filtering step in the
package reduces to ``S @ X`` with ``S = D^-1/2 A D^-1/2``, so only that
product is ever formed; ``L_s = I - S`` is never built densely outside tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class SparseGraph:
    """Undirected weighted graph on nodes ``0..n-1``.

    ``adjacency`` is a canonical (sorted, duplicate-free) symmetric CSR matrix
    with nonnegative entries.
    """

    adjacency: sp.csr_matrix

    def __post_init__(self):
        a = self.adjacency
        if a.shape[0] != a.shape[1]:
            raise ValidationError(f"adjacency must be square, got {a.shape}")
        if a.nnz and a.data.min() < 0:
            raise ValidationError("negative edge weight")
        if a.nnz and not np.all(np.isfinite(a.data)):
            raise ValidationError("non-finite edge weight")
        if (a != a.T).nnz:
            raise ValidationError("adjacency is not symmetric")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        """Undirected edge count; a self-loop counts once."""
        a = self.adjacency
        loops = int(np.count_nonzero(a.diagonal()))
        return (a.nnz - loops) // 2 + loops

    def edges(self) -> list[tuple[int, int, float]]:
        coo = sp.triu(self.adjacency).tocoo()
        return [(int(u), int(v), float(w)) for u, v, w in zip(coo.row, coo.col, coo.data)]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple], *, symmetric_input: bool = False) -> "SparseGraph":
        """Build a graph from ``(u, v)`` or ``(u, v, w)`` tuples.

        Repeated entries with the same orientation have their weights summed.
        Afterwards ``a_uv = max(w(u->v), w(v->u))``, so a file that lists each
        edge once and a file that lists it in both directions give the same
        graph.
        """
        rows, cols, vals = [], [], []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if w < 0:
                raise ValidationError(f"negative weight {w} on edge ({u}, {v})")
            rows.append(u)
            cols.append(v)
            vals.append(w)
        return cls(_symmetrize(n, rows, cols, vals))

    @classmethod
    def from_dense(cls, a) -> "SparseGraph":
        a = np.asarray(a, dtype=float)
        return cls(_canonical(sp.csr_matrix(a)))


def _canonical(a) -> sp.csr_matrix:
    a = sp.csr_matrix(a, dtype=np.float64)
    a.sum_duplicates()
    a.eliminate_zeros()
    a.sort_indices()
    return a


def _symmetrize(n, rows, cols, vals) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (rows.min() < 0 or cols.min() < 0):
        raise ValidationError("node ids must be nonnegative")
    if rows.size and max(rows.max(), cols.max()) >= n:
        raise ValidationError(f"node id out of range for n={n}")
    directed = sp.coo_matrix((np.asarray(vals, dtype=np.float64), (rows, cols)), shape=(n, n))
    directed = _canonical(directed)
    return _canonical(directed.maximum(directed.T))


def load_edge_list(source: TextIO, n_hint: int | None = None, *, name: str | None = None) -> SparseGraph:
    """Parse a whitespace-separated edge list (``u v`` or ``u v w`` per line).

    Blank lines and lines starting with ``#`` are skipped. ``n`` is the largest
    id plus one, or ``n_hint`` when that is larger.
    """
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(source, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 2 or 3 fields, got {len(parts)}", lineno, name)
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise ParseError(str(exc), lineno, name) from None
        if u < 0 or v < 0:
            raise ParseError("node ids must be nonnegative integers", lineno, name)
        if w < 0 or not np.isfinite(w):
            raise ValidationError(f"{name or '<edges>'}:{lineno}: invalid weight {parts[2]}")
        rows.append(u)
        cols.append(v)
        vals.append(w)
    n = max(rows + cols) + 1 if rows else 0
    if n_hint is not None:
        n = max(n, int(n_hint))
    return SparseGraph(_symmetrize(n, rows, cols, vals))


def remap_ids(pairs: Iterable[tuple[str, str]]) -> tuple[list[tuple[int, int]], dict[str, int]]:
    """Map arbitrary node tokens to dense ids in order of first appearance."""
    ids: dict[str, int] = {}
    out = []
    for u, v in pairs:
        out.append((ids.setdefault(u, len(ids)), ids.setdefault(v, len(ids))))
    return out, ids


def degree_vector(g: SparseGraph) -> np.ndarray:
    return np.asarray(g.adjacency.sum(axis=1)).ravel()


@dataclass(frozen=True)
class PropagationOperator:
    """``S = D^-1/2 A D^-1/2`` in CSR form.

    Rows and columns of isolated nodes are zero, so ``L_s = I - S`` acts as the
    identity on them and the low-pass step halves their features.
    """

    graph: SparseGraph
    degrees: np.ndarray
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def isolated(self) -> np.ndarray:
        return self.degrees == 0

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n:
            raise ValidationError(f"operand has {x.shape[0]} rows, operator has n={self.n}")
        return self.matrix @ x

    def laplacian_dense(self) -> np.ndarray:
        """Dense ``L_s``; for small-n checks only."""
        return np.eye(self.n) - self.matrix.toarray()


def propagation_operator(g: SparseGraph) -> PropagationOperator:
    d = degree_vector(g)
    inv_sqrt = np.zeros_like(d)
    nz = d > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(d[nz])
    a = g.adjacency.tocoo()
    s = sp.csr_matrix((a.data * inv_sqrt[a.row] * inv_sqrt[a.col], (a.row, a.col)), shape=a.shape)
    s.sort_indices()
    return PropagationOperator(g, d, s)
