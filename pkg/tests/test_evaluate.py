"""AUC, ROC, signed-rank testing, and comparison tables against brute force."""

import itertools

import numpy as np
import pytest

from seqbind.errors import DataError
from seqbind.evaluate import (compare_models, roc_auc, roc_curve, stratify_by_size,
                              trapezoid_area, wilcoxon_signed_rank)


def auc_pair_counting(scores, labels):
    """O(n^2) oracle: fraction of (pos, neg) pairs won, ties worth 1/2."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def wilcoxon_enumeration(diffs):
    """Full 2^n enumeration oracle for the two-sided exact p-value."""
    diffs = np.asarray(diffs, dtype=float)
    diffs = diffs[diffs != 0]
    n = len(diffs)
    absd = np.abs(diffs)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(n)
    sorted_abs = absd[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    w_obs = min(ranks[diffs > 0].sum(), ranks[diffs < 0].sum())
    count = 0
    for signs in itertools.product((0, 1), repeat=n):
        if sum(r for r, s in zip(ranks, signs) if s) <= w_obs:
            count += 1
    return min(1.0, 2.0 * count / 2 ** n)


class TestAuc:
    def test_perfect_separation(self):
        assert roc_auc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0

    def test_perfect_inversion(self):
        assert roc_auc([0.4, 0.6], [1, 0]) == 0.0

    def test_all_ties_give_half(self):
        assert roc_auc([0.7] * 6, [1, 1, 1, 0, 0, 0]) == 0.5

    def test_matches_pair_counting_exactly(self, rng):
        for _ in range(60):
            n = int(rng.integers(4, 80))
            scores = np.round(rng.random(n), 2)  # rounding forces ties
            labels = rng.integers(2, size=n)
            if labels.min() == labels.max():
                continue
            assert roc_auc(scores, labels) == auc_pair_counting(scores, labels)

    def test_invariant_under_monotone_transform(self, rng):
        scores = np.round(rng.random(50), 2)
        labels = (rng.random(50) < 0.4).astype(int)
        base = roc_auc(scores, labels)
        assert roc_auc(np.exp(3 * scores) + 1, labels) == base

    def test_label_flip_complements(self, rng):
        scores = rng.random(40)  # continuous, so ties have probability zero
        labels = (rng.random(40) < 0.5).astype(int)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        assert roc_auc(scores, labels) == pytest.approx(1 - roc_auc(scores, 1 - labels),
                                                        abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_auc([0.1, 0.2], [1, 1])


class TestRocCurve:
    def test_endpoints_and_perfect_corner(self):
        points = roc_curve([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0])
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)
        assert (0.0, 1.0) in points

    def test_trapezoid_equals_auc(self, rng):
        for _ in range(30):
            n = int(rng.integers(5, 60))
            scores = np.round(rng.random(n), 1)
            labels = rng.integers(2, size=n)
            if labels.min() == labels.max():
                continue
            points = roc_curve(scores, labels)
            assert trapezoid_area(points) == pytest.approx(roc_auc(scores, labels),
                                                           abs=1e-12)


class TestWilcoxon:
    def test_all_positive_five(self):
        w, p = wilcoxon_signed_rank(np.array([1.0, 2, 3, 4, 5]), np.zeros(5))
        assert w == 0.0
        assert p == pytest.approx(0.0625, abs=1e-15)

    def test_symmetric_in_argument_order(self, rng):
        a = rng.random(10)
        b = rng.random(10)
        wa, pa = wilcoxon_signed_rank(a, b)
        wb, pb = wilcoxon_signed_rank(b, a)
        assert wa == wb and pa == pb

    def test_matches_enumeration_with_ties(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 11))
            diffs = np.round(rng.standard_normal(n), 1)
            if np.all(diffs == 0):
                continue
            w, p = wilcoxon_signed_rank(diffs, np.zeros(n))
            assert p == pytest.approx(wilcoxon_enumeration(diffs), abs=1e-13)

    def test_normal_approximation_close_at_n20(self, rng):
        for _ in range(5):
            a = rng.random(20)
            b = a + rng.standard_normal(20) * 0.3
            _, exact = wilcoxon_signed_rank(a, b)
            d = a - b
            d = d[d != 0]
            n = len(d)
            mu = n * (n + 1) / 4.0
            ranks_abs = np.argsort(np.argsort(np.abs(d))) + 1.0
            w = min(ranks_abs[d > 0].sum(), ranks_abs[d < 0].sum())
            sigma = np.sqrt(n * (n + 1) * (2 * n + 1) / 24.0)
            import math
            approx = min(1.0, math.erfc(-((w - mu + 0.5) / sigma) / math.sqrt(2)))
            assert abs(exact - approx) < 0.01

    def test_all_zero_differences_rejected(self):
        with pytest.raises(DataError):
            wilcoxon_signed_rank(np.ones(5), np.ones(5))


class TestCompareModels:
    def _table(self, rng, n_datasets=10, n_models=3):
        return rng.random((n_datasets, n_models)) * 0.2 + 0.75

    def test_duplicate_columns_flagged(self, rng):
        t = self._table(rng)
        t[:, 1] = t[:, 0]
        result = compare_models(t, ["a", "b", "c"])
        assert result.p_values[0, 1] == 1.0
        assert ("a", "b") in result.identical_pairs

    def test_symmetry_and_antisymmetry(self, rng):
        t = self._table(rng)
        result = compare_models(t)
        np.testing.assert_allclose(result.p_values, result.p_values.T, equal_nan=True)
        np.testing.assert_allclose(result.mean_diff, -result.mean_diff.T, atol=1e-15)

    def test_cells_match_direct_calls(self, rng):
        t = self._table(rng, n_datasets=12, n_models=4)
        result = compare_models(t)
        for i in range(4):
            for j in range(i + 1, 4):
                _, p = wilcoxon_signed_rank(t[:, i], t[:, j])
                assert result.p_values[i, j] == p

    def test_too_few_datasets_rejected(self, rng):
        with pytest.raises(DataError, match="6 datasets"):
            compare_models(self._table(rng, n_datasets=5))


class TestStratify:
    def test_two_singleton_groups(self):
        out = stratify_by_size([5_000, 20_000], [[0.8, 0.9], [0.6, 0.7]], ["m0", "m1"])
        assert out.group_datasets == {"small": [0], "large": [1]}
        assert out.medians["small", "m0"] == 0.8
        assert not out.empty_groups

    def test_empty_group_flagged(self):
        out = stratify_by_size([100, 200], [[0.8, 0.9], [0.6, 0.7]])
        assert out.empty_groups == ["large"]
        assert np.isnan(out.medians["large", "model0"])

    def test_median_matches_sort_oracle(self, rng):
        counts = rng.integers(1_000, 30_000, size=9)
        table = rng.random((9, 2))
        out = stratify_by_size(counts, table)
        for gname, idx in out.group_datasets.items():
            for m in range(2):
                if not idx:
                    continue
                vals = sorted(table[i, m] for i in idx)
                k = len(vals)
                oracle = vals[k // 2] if k % 2 else (vals[k // 2 - 1] + vals[k // 2]) / 2
                assert out.medians[gname, f"model{m}"] == pytest.approx(oracle, abs=1e-15)
