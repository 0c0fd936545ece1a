"""Linear-kernel spectral clustering with seeded k-means++ / Lloyd."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ValidationError

DENSE_EIGEN_LIMIT = 1000


@dataclass(frozen=True)
class ClusterPartition:
    """Hard assignment of ``n`` nodes to ``m`` clusters.

    Labels produced by :func:`kmeans` are canonical: clusters are numbered by
    first appearance, so any empty clusters are the trailing ids.
    """

    labels: np.ndarray
    m: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValidationError("labels must be one-dimensional")
        if labels.size and (labels.min() < 0 or labels.max() >= self.m):
            raise ValidationError(f"labels must lie in 0..{self.m - 1}")
        object.__setattr__(self, "labels", labels.astype(np.int64, copy=False))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.m)

    @property
    def empty_clusters(self) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.sizes == 0)]

    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.m)]

    @classmethod
    def from_labels(cls, labels, m: int | None = None) -> "ClusterPartition":
        labels = np.asarray(labels, dtype=np.int64)
        if m is None:
            m = int(labels.max()) + 1 if labels.size else 0
        return cls(labels, m)


def canonical_labels(labels) -> np.ndarray:
    """Renumber labels in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse.ravel()]


def linear_kernel(xbar) -> np.ndarray:
    """Similarity ``W = (|K| + |K'|) / 2`` with ``K = Xbar Xbar'``."""
    xbar = np.asarray(xbar, dtype=np.float64)
    if xbar.ndim != 2 or xbar.shape[0] < 2:
        raise ValidationError("need a 2-D feature matrix with at least two rows")
    k = np.abs(xbar @ xbar.T)
    return 0.5 * (k + k.T)


@dataclass(frozen=True)
class SpectralEmbedding:
    vectors: np.ndarray  # (n, m), columns orthonormal
    values: np.ndarray  # (m,), descending


def _fix_signs(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def top_eigenvectors(w, m: int, dense_limit: int = DENSE_EIGEN_LIMIT) -> SpectralEmbedding:
    """Eigenpairs of symmetric ``w`` for its ``m`` largest eigenvalues.

    Dense LAPACK up to ``dense_limit`` nodes, ARPACK Lanczos beyond that.
    Each column is flipped so its largest-magnitude entry is positive.
    """
    n = w.shape[0]
    if not 1 <= m <= n:
        raise ValidationError(f"need 1 <= m <= n, got m={m}, n={n}")
    if n <= dense_limit:
        vals, vecs = scipy.linalg.eigh(w, subset_by_index=[n - m, n - 1])
    else:
        v0 = np.random.default_rng(0).standard_normal(n)
        vals, vecs = scipy.sparse.linalg.eigsh(w, k=m, which="LA", v0=v0, tol=0)
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    vals = vals[::-1].copy()
    vecs = _fix_signs(np.ascontiguousarray(vecs[:, ::-1]))
    return SpectralEmbedding(vecs, vals)


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_plusplus(x: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((m, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dists(x, centers[:1]).ravel()
    for j in range(1, m):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[j] = x[idx]
        closest = np.minimum(closest, _sq_dists(x, centers[j : j + 1]).ravel())
    return centers


@dataclass
class LloydResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    history: list[float] = field(default_factory=list)


def lloyd(x, centers, max_iter: int = 300, tol: float = 1e-6) -> LloydResult:
    """Lloyd iterations from the given centers.

    ``history`` holds the inertia after every assignment step; it never
    increases. An empty cluster is reseeded at the point farthest from its
    current center, unless every point already sits on its center.
    """
    x = np.asarray(x, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64)
    m = centers.shape[0]
    history: list[float] = []
    it = 0
    while True:
        d2 = _sq_dists(x, centers)
        labels = np.argmin(d2, axis=1)
        own = d2[np.arange(x.shape[0]), labels]
        inertia = float(own.sum())
        history.append(inertia)
        it += 1
        if it > 1:
            prev = history[-2]
            if prev - inertia <= tol * prev:
                break
        if it >= max_iter:
            break
        counts = np.bincount(labels, minlength=m)
        for c in range(m):
            if counts[c]:
                centers[c] = x[labels == c].mean(axis=0)
        for c in np.flatnonzero(counts == 0):
            far = int(np.argmax(own))
            if own[far] == 0:
                break
            centers[c] = x[far]
            own[far] = 0.0
    return LloydResult(labels, centers, inertia, it, history)


def kmeans(
    x,
    m: int,
    seed: int = 0,
    restarts: int = 10,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterPartition:
    """Best-of-``restarts`` k-means++ / Lloyd, fully determined by ``seed``.

    Restart ``r`` draws from the ``r``-th child of ``SeedSequence(seed)``; the
    lowest inertia wins and ties go to the lower restart index.
    """
    if isinstance(x, SpectralEmbedding):
        x = x.vectors
    x = np.asarray(x, dtype=np.float64)
    if m < 1:
        raise ValidationError(f"cluster count must be >= 1, got {m}")
    if restarts < 1:
        raise ValidationError(f"restarts must be >= 1, got {restarts}")
    if x.shape[0] < m:
        raise ValidationError(f"cannot form {m} clusters from {x.shape[0]} points")
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.Generator(np.random.PCG64(child))
        res = lloyd(x, kmeans_plusplus(x, m, rng), max_iter=max_iter, tol=tol)
        if best is None or res.inertia < best.inertia:
            best = res
    return ClusterPartition(canonical_labels(best.labels), m)


def spectral_cluster(
    xbar,
    m: int,
    seed: int = 0,
    restarts: int = 10,
    *,
    normalize_rows: bool = False,
    scale_by_eigenvalues: bool = False,
    dense_limit: int = DENSE_EIGEN_LIMIT,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterPartition:
    """Cluster rows of ``xbar`` via the top-``m`` eigenvectors of its linear kernel."""
    return cluster_similarity(
        linear_kernel(xbar), m, seed, restarts,
        normalize_rows=normalize_rows, scale_by_eigenvalues=scale_by_eigenvalues,
        dense_limit=dense_limit, max_iter=max_iter, tol=tol,
    )


def cluster_similarity(
    w,
    m: int,
    seed: int = 0,
    restarts: int = 10,
    *,
    normalize_rows: bool = False,
    scale_by_eigenvalues: bool = False,
    dense_limit: int = DENSE_EIGEN_LIMIT,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterPartition:
    """Spectral clustering on a precomputed similarity matrix.

    With ``w`` set to the adjacency matrix this is the graph-only baseline.
    """
    emb = top_eigenvectors(w, m, dense_limit=dense_limit)
    v = emb.vectors
    if scale_by_eigenvalues:
        v = v * emb.values
    if normalize_rows:
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        v = np.divide(v, norms, out=np.zeros_like(v), where=norms > 0)
    return kmeans(v, m, seed=seed, restarts=restarts, max_iter=max_iter, tol=tol)
