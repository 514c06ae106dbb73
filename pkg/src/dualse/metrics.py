"""Clustering evaluation: ACC under optimal label matching, NMI, purity,
and the matched confusion matrix."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError


@dataclass
class ClusterReport:
    """Predicted labels with scores and the optimally matched confusion
    matrix (rows: true classes, columns: predicted clusters after
    matching, so correct assignments sit on the diagonal)."""

    labels: np.ndarray
    acc: float
    nmi: float
    pur: float
    confusion: np.ndarray


def hungarian(cost):
    """Minimum-cost square assignment (Kuhn-Munkres).

    Returns an array ``assign`` with ``assign[i]`` the column matched to
    row ``i``. Shortest-augmenting-path formulation with row/column
    potentials, O(k^3).
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ShapeError(f"cost matrix must be square, got {cost.shape}")
    if not np.isfinite(cost).all():
        raise NumericError("cost matrix has non-finite entries")
    n = cost.shape[0]
    # 1-based internals; p[j] is the row matched to column j, column 0 is
    # a virtual root.
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = -1
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assign = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        assign[p[j] - 1] = j - 1
    return assign


def _as_labels(y, c):
    y = np.asarray(y).ravel()
    c = np.asarray(c).ravel()
    if y.size != c.size:
        raise ShapeError(f"label vectors differ in length: {y.size} vs {c.size}")
    if y.size == 0:
        raise ShapeError("label vectors must be non-empty")
    return y.astype(np.int64), c.astype(np.int64)


def contingency(y, c):
    """Count table: rows over distinct true labels, columns over distinct
    predicted labels (both in sorted value order), padded with zeros to a
    square when the class counts differ."""
    y, c = _as_labels(y, c)
    _, yi = np.unique(y, return_inverse=True)
    _, ci = np.unique(c, return_inverse=True)
    ky = int(yi.max()) + 1
    kc = int(ci.max()) + 1
    k = max(ky, kc)
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (yi, ci), 1)
    return table


def accuracy(y, c):
    """Fraction of samples matched under the best one-to-one mapping of
    predicted clusters onto true classes."""
    table = contingency(y, c)
    assign = hungarian(-table.astype(np.float64))
    matched = table[np.arange(table.shape[0]), assign].sum()
    return float(matched) / float(np.asarray(y).size)


def nmi(y, c):
    """Mutual information normalized by max(H(Y), H(C)).

    Conventions for degenerate partitions: both single-class -> 1.0; exactly
    one single-class -> 0.0.
    """
    y, c = _as_labels(y, c)
    n = y.size
    table = contingency(y, c).astype(np.float64)
    py = table.sum(axis=1) / n
    pc = table.sum(axis=0) / n
    ky = int((py > 0).sum())
    kc = int((pc > 0).sum())
    if ky == 1 and kc == 1:
        return 1.0
    if ky == 1 or kc == 1:
        return 0.0
    # exact accumulation keeps the result identical under any relabeling
    # (term order changes, the term multiset does not)
    terms = []
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            pij = table[i, j] / n
            if pij > 0.0:
                terms.append(pij * math.log(pij / (py[i] * pc[j])))
    mi = math.fsum(terms)
    hy = -math.fsum(p * math.log(p) for p in py if p > 0.0)
    hc = -math.fsum(p * math.log(p) for p in pc if p > 0.0)
    return mi / max(hy, hc)


def purity(y, c):
    """Average over predicted clusters of their majority true-class share."""
    table = contingency(y, c)
    return float(table.max(axis=0).sum()) / float(np.asarray(y).size)


def cluster_report(y, c):
    """Score a predicted labeling against ground truth."""
    y, c = _as_labels(y, c)
    table = contingency(y, c)
    assign = hungarian(-table.astype(np.float64))
    matched = table[np.arange(table.shape[0]), assign].sum()
    confusion = table[:, assign].copy()
    return ClusterReport(
        labels=c.copy(),
        acc=float(matched) / float(y.size),
        nmi=nmi(y, c),
        pur=purity(y, c),
        confusion=confusion,
    )
