"""ROC/AUC computation, Wilcoxon signed-rank comparison of models across
datasets, and dataset-size-stratified summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError

EXACT_WILCOXON_MAX_N = 25


def _midranks(values):
    """1-based ranks with ties sharing their average rank (exact halves)."""
    values = np.asarray(values)
    order = np.argsort(values, kind="stable")
    sv = values[order]
    n = len(values)
    bounds = np.flatnonzero(sv[1:] != sv[:-1]) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [n]])
    ranks = np.empty(n)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    return ranks


def _check_two_classes(labels):
    labels = np.asarray(labels, dtype=np.float64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs at least one positive and one negative example")
    return labels, n_pos, n_neg


def roc_auc(scores, labels):
    """Probability a random positive outscores a random negative (ties 1/2).

    Computed from the positive rank sum in O(n log n); agrees exactly with
    pairwise counting because both reduce to the same dyadic rational.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels, n_pos, n_neg = _check_two_classes(labels)
    ranks = _midranks(scores)
    rank_sum = ranks[labels == 1].sum()
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_curve(scores, labels):
    """(FPR, TPR) points from a descending threshold sweep, ends included."""
    scores = np.asarray(scores, dtype=np.float64)
    labels, n_pos, n_neg = _check_two_classes(labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        tp += int(y[i:j + 1].sum())
        fp += (j - i + 1) - int(y[i:j + 1].sum())
        points.append((fp / n_neg, tp / n_pos))
        i = j + 1
    return points


def trapezoid_area(points):
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def wilcoxon_signed_rank(a, b):
    """Two-sided paired signed-rank test; returns (W, p).

    Zero differences are dropped; |differences| get midranks; W is the
    smaller of the positive/negative rank sums. For n <= 25 the p-value
    counts all 2^n sign assignments exactly; beyond that a normal
    approximation with tie correction and continuity correction is used.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"paired test needs equal-length vectors, got {a.shape} vs {b.shape}")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise DataError("all paired differences are zero")
    ranks = _midranks(np.abs(d))
    w_plus = ranks[d > 0].sum()
    w_minus = ranks[d < 0].sum()
    w = min(w_plus, w_minus)
    if n <= EXACT_WILCOXON_MAX_N:
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        limit = np.int64(round(2.0 * w))
        count = int(kernels.get().count_signed_rank_le(ranks2, limit))
        p = min(1.0, 2.0 * count / float(2 ** n))
    else:
        mu = n * (n + 1) / 4.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        tie_term = float((tie_counts ** 3 - tie_counts).sum())
        sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
        z = (w - mu + 0.5) / math.sqrt(sigma2)
        p = min(1.0, math.erfc(-z / math.sqrt(2.0)))
    return float(w), float(p)


@dataclass
class ComparisonTable:
    model_names: list
    p_values: np.ndarray       # symmetric, nan diagonal
    mean_diff: np.ndarray      # antisymmetric: mean(col_i) - mean(col_j)
    identical_pairs: list = field(default_factory=list)


def compare_models(auc_table, model_names=None):
    """Pairwise signed-rank tests over per-dataset AUC columns.

    Identical columns short-circuit to p = 1 and are flagged rather than
    passed to the test (which rejects all-zero difference vectors).
    """
    table = np.asarray(auc_table, dtype=np.float64)
    if table.ndim != 2 or table.shape[1] < 2:
        raise DataError("comparison needs a (datasets x models) table with >= 2 models")
    if table.shape[0] < 6:
        raise DataError(f"comparison needs >= 6 datasets, got {table.shape[0]}")
    n_models = table.shape[1]
    if model_names is None:
        model_names = [f"model{i}" for i in range(n_models)]
    p = np.full((n_models, n_models), np.nan)
    diff = np.zeros((n_models, n_models))
    identical = []
    for i in range(n_models):
        for j in range(i + 1, n_models):
            delta = float(table[:, i].mean() - table[:, j].mean())
            diff[i, j] = delta
            diff[j, i] = -delta
            if np.array_equal(table[:, i], table[:, j]):
                p[i, j] = p[j, i] = 1.0
                identical.append((model_names[i], model_names[j]))
            else:
                _, pv = wilcoxon_signed_rank(table[:, i], table[:, j])
                p[i, j] = p[j, i] = pv
    return ComparisonTable(list(model_names), p, diff, identical)


@dataclass
class SizeStratification:
    threshold: int
    group_names: tuple
    group_datasets: dict       # group -> list of dataset row indices
    medians: dict              # (group, model) -> float
    means: dict
    empty_groups: list


def stratify_by_size(pos_counts, auc_table, model_names=None, threshold=10_000):
    """Split datasets at `threshold` positive examples and summarize each
    model's AUC per group (median and mean). Empty groups are flagged."""
    table = np.asarray(auc_table, dtype=np.float64)
    counts = np.asarray(pos_counts)
    if len(counts) != table.shape[0]:
        raise DataError("one positive count per dataset row is required")
    if model_names is None:
        model_names = [f"model{i}" for i in range(table.shape[1])]
    groups = {
        "small": np.flatnonzero(counts < threshold),
        "large": np.flatnonzero(counts >= threshold),
    }
    medians, means = {}, {}
    empty = [g for g, idx in groups.items() if len(idx) == 0]
    for gname, idx in groups.items():
        for m, name in enumerate(model_names):
            if len(idx) == 0:
                medians[gname, name] = float("nan")
                means[gname, name] = float("nan")
            else:
                medians[gname, name] = float(np.median(table[idx, m]))
                means[gname, name] = float(table[idx, m].mean())
    return SizeStratification(threshold, ("small", "large"),
                              {g: list(map(int, i)) for g, i in groups.items()},
                              medians, means, empty)
