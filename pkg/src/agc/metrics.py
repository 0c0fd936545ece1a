"""Internal (intra-cluster distance) and external (Acc, NMI, F1) criteria."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, ValidationError
from .spectral import ClusterPartition

NMI_AVERAGES = ("geometric", "arithmetic", "max", "min")


def _labels(p) -> np.ndarray:
    if isinstance(p, ClusterPartition):
        return p.labels
    return np.asarray(p).ravel()


def _pair(pred, truth):
    a, b = _labels(pred), _labels(truth)
    if a.shape[0] != b.shape[0]:
        raise ValidationError(f"label vectors differ in length: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise ValidationError("empty label vectors")
    return a, b


def contingency(pred, truth):
    """Count table ``C[i, j] = |pred == p_i and truth == t_j|`` plus the label values."""
    a, b = _pair(pred, truth)
    pv, pi = np.unique(a, return_inverse=True)
    tv, ti = np.unique(b, return_inverse=True)
    table = np.zeros((pv.size, tv.size), dtype=np.int64)
    np.add.at(table, (pi.ravel(), ti.ravel()), 1)
    return table, pv, tv


def _pairwise_distance_sum(members: np.ndarray, block: int) -> float:
    """Sum of ``||a - b||`` over ordered pairs, via a centred Gram matrix.

    Pairs whose squared distance is small next to their squared norms lose
    digits to cancellation and are recomputed directly.
    """
    c = members - members.mean(axis=0)
    sq = np.einsum("ij,ij->i", c, c)
    total = 0.0
    for start in range(0, c.shape[0], block):
        rows = c[start : start + block]
        d2 = sq[start : start + block, None] + sq[None, :] - 2.0 * (rows @ c.T)
        risky = d2 < 1e-6 * (sq[start : start + block, None] + sq[None, :])
        i, j = np.nonzero(risky)
        d2[i, j] = np.einsum("ij,ij->i", rows[i] - c[j], rows[i] - c[j])
        total += float(np.sqrt(np.maximum(d2, 0.0)).sum())
    return total


def intra_distance(xbar, part, block: int = 1024) -> float:
    """Mean over non-singleton clusters of the mean pairwise Euclidean distance.

    Singleton (and empty) clusters are left out of the outer average. Raises
    :class:`DomainError` when no cluster has two or more members.
    """
    xbar = np.asarray(xbar, dtype=np.float64)
    labels = _labels(part)
    if labels.shape[0] != xbar.shape[0]:
        raise ValidationError(f"partition covers {labels.shape[0]} rows, features have {xbar.shape[0]}")
    values = []
    for c in np.unique(labels):
        members = xbar[labels == c]
        size = members.shape[0]
        if size < 2:
            continue
        values.append(_pairwise_distance_sum(members, block) / (size * (size - 1)))
    if not values:
        raise DomainError("intra-cluster distance undefined: every cluster is a singleton")
    return float(np.mean(values))


def _pair_f1(table: np.ndarray) -> np.ndarray:
    pred_sizes = table.sum(axis=1, keepdims=True)
    true_sizes = table.sum(axis=0, keepdims=True)
    return 2.0 * table / (pred_sizes + true_sizes)


def accuracy(pred, truth) -> tuple[float, dict[int, int]]:
    """Accuracy under the best one-to-one matching of predicted to true labels.

    Returns the accuracy and the matching ``{pred_label: true_label}``. Among
    matchings with the same number of hits, the one with the largest summed
    per-pair F1 is chosen, which keeps macro-F1 independent of label names.
    """
    table, pv, tv = contingency(pred, truth)
    # F1 sums to at most min(table.shape) < weight denominator, so hits dominate
    tiebreak = _pair_f1(table) / (min(table.shape) + 1)
    rows, cols = linear_sum_assignment(table + tiebreak, maximize=True)
    matched = int(table[rows, cols].sum())
    matching = {int(pv[r]): int(tv[c]) for r, c in zip(rows, cols)}
    return matched / int(table.sum()), matching


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth, average: str = "geometric") -> float:
    """Normalized mutual information with natural-log entropies."""
    if average not in NMI_AVERAGES:
        raise ValidationError(f"average must be one of {NMI_AVERAGES}")
    table, _, _ = contingency(pred, truth)
    n = int(table.sum())
    hp = _entropy(table.sum(axis=1), n)
    ht = _entropy(table.sum(axis=0), n)
    if hp == 0.0 and ht == 0.0:
        return 1.0
    if hp == 0.0 or ht == 0.0:
        return 0.0
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))[nz] / (n * n)
    mi = float(np.sum(pij * np.log(pij / outer)))
    norm = {
        "geometric": math.sqrt(hp * ht),
        "arithmetic": 0.5 * (hp + ht),
        "max": max(hp, ht),
        "min": min(hp, ht),
    }[average]
    return min(max(mi / norm, 0.0), 1.0)


def macro_f1(pred, truth, matching: dict[int, int] | None = None) -> float:
    """Unweighted mean over true classes of F1 against the matched predicted cluster.

    A true class left without a matched cluster scores zero.
    """
    a, b = _pair(pred, truth)
    if matching is None:
        _, matching = accuracy(a, b)
    inverse = {t: p for p, t in matching.items()}
    scores = []
    for t in np.unique(b):
        p = inverse.get(int(t))
        if p is None:
            scores.append(0.0)
            continue
        in_t = b == t
        in_p = a == p
        hit = int(np.count_nonzero(in_t & in_p))
        if hit == 0:
            scores.append(0.0)
            continue
        precision = hit / int(np.count_nonzero(in_p))
        recall = hit / int(np.count_nonzero(in_t))
        scores.append(2 * precision * recall / (precision + recall))
    return float(np.mean(scores))


@dataclass
class MetricsReport:
    acc: float | None = None
    nmi: float | None = None
    macro_f1: float | None = None
    intra: float | None = None
    matching: dict[int, int] | None = None
    k_selected: int | None = None

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        if "matching" in d:
            d["matching"] = {str(k): v for k, v in sorted(d["matching"].items())}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def evaluate(pred, truth=None, xbar=None, *, nmi_average: str = "geometric", k_selected=None) -> MetricsReport:
    """Bundle whichever metrics the supplied inputs allow."""
    report = MetricsReport(k_selected=k_selected)
    if truth is not None:
        report.acc, report.matching = accuracy(pred, truth)
        report.nmi = nmi(pred, truth, average=nmi_average)
        report.macro_f1 = macro_f1(pred, truth, report.matching)
    if xbar is not None:
        report.intra = intra_distance(xbar, pred)
    return report
