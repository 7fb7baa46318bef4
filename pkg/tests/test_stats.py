"""Wilcoxon signed-rank test, Holm correction, ranks, correlation and
selection-frequency reports."""

import itertools

import numpy as np
import pytest

from autopu import stats
from autopu.core_types import SearchSpace
from autopu.stats import (
    PairedSample,
    average_ranks,
    compare_systems,
    correlation_category,
    holm,
    pearson,
    selection_frequency,
    wilcoxon,
)


def exact_wilcoxon_oracle(differences):
    """Brute force over all sign assignments with mean ranks on tied |d|."""
    d = np.asarray([x for x in differences if x != 0], dtype=float)
    n = len(d)
    absd = np.abs(d)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and absd[order[j + 1]] == absd[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    w_plus = ranks[d > 0].sum()
    sums = [sum(r for r, s in zip(ranks, signs) if s)
            for signs in itertools.product([False, True], repeat=n)]
    total = len(sums)
    cdf = sum(s <= w_plus + 1e-12 for s in sums) / total
    sf = sum(s >= w_plus - 1e-12 for s in sums) / total
    return min(1.0, 2 * min(cdf, sf))


def paired(differences):
    d = np.asarray(differences, dtype=float)
    return PairedSample(d, np.zeros(len(d)), tuple(str(i) for i in range(len(d))))


class TestWilcoxon:
    def test_textbook_case(self):
        res = wilcoxon(paired([1, 2, 3, 4, 5]))
        assert res.method == "exact"
        assert res.p_value == pytest.approx(0.0625)
        assert res.statistic == 15.0
        assert res.n_nonzero == 5

    def test_sign_symmetry(self):
        assert wilcoxon(paired([1, 2, 3])).p_value == pytest.approx(
            wilcoxon(paired([-1, -2, -3])).p_value
        )

    def test_all_zero_is_degenerate(self):
        res = wilcoxon(paired([0, 0, 0]))
        assert res.degenerate
        assert res.p_value == 1.0

    def test_zero_differences_dropped(self):
        assert wilcoxon(paired([0, 1, 2, 0, 3])).n_nonzero == 3

    def test_exact_matches_enumeration_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(60):
            n = int(rng.integers(2, 10))
            d = np.round(rng.normal(0, 2, n), 0)  # integers force ties/zeros
            if np.all(d == 0):
                continue
            got = wilcoxon(paired(d), force_method="exact")
            assert got.p_value == pytest.approx(exact_wilcoxon_oracle(d), abs=1e-12)

    def test_method_switch_at_limit(self):
        d = np.arange(1.0, 14.0)  # 13 non-zero differences
        assert wilcoxon(paired(d)).method == "approx"
        assert wilcoxon(paired(d[:12])).method == "exact"

    def test_approx_in_range(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            d = rng.normal(0, 1, 30)
            p = wilcoxon(paired(d)).p_value
            assert 0.0 <= p <= 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            PairedSample(np.zeros(3), np.zeros(2), ("a", "b"))


class TestHolm:
    def test_stepdown_example(self):
        report = holm([0.01, 0.04, 0.03], alpha=0.05)
        # sorted: 0.01 @ 0.0167 (sig), 0.03 @ 0.025 (not), 0.04 stopped
        assert report.p_values == [0.01, 0.03, 0.04]
        assert report.adjusted_alphas == pytest.approx(
            [0.05 / 3, 0.05 / 2, 0.05]
        )
        assert report.significant == [True, False, False]
        assert report.stop_index == 1
        assert report.decision_for(0) is True
        assert report.decision_for(1) is False

    def test_all_significant(self):
        report = holm([0.001, 0.002], alpha=0.05)
        assert report.significant == [True, True]
        assert report.stop_index == 2

    def test_stop_propagates(self):
        # the second-smallest p would pass its own level but the procedure
        # already stopped at the smallest
        report = holm([0.9, 0.01], alpha=0.05)
        assert report.significant == [True, False]
        report = holm([0.5, 0.04], alpha=0.05)
        assert report.significant == [False, False]

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            holm([])
        with pytest.raises(ValueError):
            holm([1.2])


def test_average_ranks():
    assert average_ranks([1, 2, 3], [0, 2, 5]) == (1.5, 1.5)
    assert average_ranks([2, 2], [1, 1]) == (1.0, 2.0)
    a = [0.9] * 13 + [0.5] * 12
    b = [0.8] * 13 + [0.6] * 12
    ra, rb = average_ranks(a, b)
    assert ra == pytest.approx(1.48)
    assert rb == pytest.approx(1.52)
    with pytest.raises(ValueError):
        average_ranks([1], [1, 2])


class TestPearson:
    def test_perfect_correlations(self):
        x = np.arange(10.0)
        assert pearson(x, 2 * x + 1) == pytest.approx(1.0)
        assert pearson(x, -x) == pytest.approx(-1.0)

    def test_matches_manual_formula(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=50), rng.normal(size=50)
        manual = (np.sum((x - x.mean()) * (y - y.mean()))
                  / np.sqrt(np.sum((x - x.mean()) ** 2) * np.sum((y - y.mean()) ** 2)))
        assert pearson(x, y) == pytest.approx(manual, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            pearson([1.0], [2.0])
        with pytest.raises(ValueError):
            pearson([1, 1, 1], [1, 2, 3])


def test_correlation_categories():
    assert correlation_category(0.05) == "negligible"
    assert correlation_category(0.1) == "weak"
    assert correlation_category(0.39) == "weak"
    assert correlation_category(0.4) == "moderate"
    assert correlation_category(0.7) == "strong"
    assert correlation_category(-0.8) == "strong"
    assert correlation_category(0.9) == "very strong"
    assert correlation_category(1.0) == "very strong"


def test_selection_frequency():
    space = SearchSpace(variant="base",
                        classifier_registry=("gaussian_nb", "knn"))
    configs = [
        {"iteration_count_1a": 1, "threshold_1a": 0.05, "classifier_1a": "knn",
         "threshold_1b": 0.1, "classifier_1b": "knn", "flag_1b": True,
         "classifier_2": "knn"},
        {"iteration_count_1a": 1, "threshold_1a": 0.1, "classifier_1a": "knn",
         "threshold_1b": 0.1, "classifier_1b": "gaussian_nb", "flag_1b": False,
         "classifier_2": "knn"},
        {"iteration_count_1a": 2, "threshold_1a": 0.05, "classifier_1a": "gaussian_nb",
         "threshold_1b": 0.1, "classifier_1b": "gaussian_nb", "flag_1b": True,
         "classifier_2": "knn"},
    ]
    rows = {r.hyperparameter: r for r in selection_frequency(configs, space)}
    assert len(rows) == 7
    iteration = rows["iteration_count_1a"]
    assert iteration.most_selected == 1
    assert iteration.selection_freq == pytest.approx(200 / 3)
    assert iteration.baseline_freq == pytest.approx(10.0)
    assert iteration.diff == pytest.approx(200 / 3 - 10.0)
    assert rows["classifier_2"].selection_freq == pytest.approx(100.0)
    assert rows["classifier_2"].baseline_freq == pytest.approx(50.0)
    with pytest.raises(ValueError):
        selection_frequency([], space)


def test_compare_systems():
    metrics = {
        "ga": {f"d{i}": 0.9 + 0.001 * i for i in range(8)},
        "sem": {f"d{i}": 0.7 + 0.001 * i for i in range(8)},
    }
    rows = compare_systems(metrics, "f_measure")
    assert len(rows) == 1
    row = rows[0]
    assert (row.system_a, row.system_b) == ("ga", "sem")
    assert row.rank_a == 1.0 and row.rank_b == 2.0
    assert row.p_value == pytest.approx(2 / 2**8)
    assert row.significant


def test_compare_systems_requires_shared_datasets():
    with pytest.raises(ValueError):
        compare_systems({"a": {"d1": 0.5}, "b": {"d2": 0.5}}, "f_measure")
    with pytest.raises(ValueError):
        compare_systems({"a": {"d1": 0.5}}, "f_measure")
