"""Two-step pipeline execution: unlabelled splitting, spy thresholds,
reliable-negative mining and the composed run."""

import numpy as np
import pytest

from autopu import pu_engine
from autopu.core_types import CandidateConfig, PUDataset
from conftest import make_blobs


def spy_threshold_oracle(probs, tolerance):
    """Exhaustive search over candidate thresholds: the largest candidate
    leaving at most floor(tolerance * n) spies strictly below it."""
    probs = np.asarray(probs, dtype=float)
    n = len(probs)
    m = int(np.floor(tolerance * n))
    candidates = sorted(set(probs)) + [float(np.max(probs)) + 1e-9]
    feasible = [t for t in candidates if np.sum(probs < t) <= m]
    return max(feasible)


class TestSplitUnlabelled:
    def test_partition_and_balance(self):
        rng = np.random.default_rng(0)
        idx = np.arange(100, 137)
        subsets, diag = pu_engine.split_unlabelled(idx, 5, rng)
        assert diag == []
        assert len(subsets) == 5
        sizes = [len(s) for s in subsets]
        assert max(sizes) - min(sizes) <= 1
        merged = np.sort(np.concatenate(subsets))
        assert np.array_equal(merged, idx)

    def test_clamp_reports_diagnostic(self):
        rng = np.random.default_rng(0)
        subsets, diag = pu_engine.split_unlabelled(np.arange(3), 8, rng)
        assert len(subsets) == 3
        assert len(diag) == 1 and "clamped" in diag[0]

    def test_invalid_count(self):
        with pytest.raises(ValueError):
            pu_engine.split_unlabelled(np.arange(5), 0, np.random.default_rng(0))


class TestSpyThreshold:
    def test_hand_cases(self):
        probs = [0.4, 0.1, 0.3, 0.2]
        assert pu_engine.spy_threshold(probs, 0.0) == 0.1
        assert pu_engine.spy_threshold(probs, 0.25) == 0.2
        assert pu_engine.spy_threshold(probs, 0.5) == 0.3
        # full tolerance: threshold exceeds every spy
        assert pu_engine.spy_threshold(probs, 1.0) > 0.4

    def test_ties(self):
        probs = [0.2, 0.2, 0.2, 0.5]
        assert pu_engine.spy_threshold(probs, 0.25) == 0.2
        assert pu_engine.spy_threshold(probs, 0.75) == 0.5

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n = int(rng.integers(1, 30))
            probs = np.round(rng.uniform(0, 1, n), 1)  # rounding forces ties
            tol = float(rng.uniform(0, 1))
            assert pu_engine.spy_threshold(probs, tol) == pytest.approx(
                spy_threshold_oracle(probs, tol), abs=0.0
            )

    def test_errors(self):
        with pytest.raises(ValueError):
            pu_engine.spy_threshold([], 0.1)
        with pytest.raises(ValueError):
            pu_engine.spy_threshold([0.5], 1.5)


def test_run_two_step_basic(pu_dataset, simple_config):
    model = pu_engine.run_two_step(simple_config, pu_dataset, seed=0)
    assert not model.failed
    assert model.rn_size_1a > 0
    pred = model.predict(pu_dataset.features)
    # reliable-negative training must not touch labelled positives
    assert np.mean(pred[pu_dataset.s == 1]) > 0.9
    f_true = np.mean(pred == pu_dataset.y_true)
    assert f_true > 0.9


def test_run_two_step_deterministic(pu_dataset, simple_config):
    a = pu_engine.run_two_step(simple_config, pu_dataset, seed=11)
    b = pu_engine.run_two_step(simple_config, pu_dataset, seed=11)
    X = pu_dataset.features
    assert a.rn_size_1a == b.rn_size_1a
    assert a.rn_size_1b == b.rn_size_1b
    assert np.array_equal(a.predict(X), b.predict(X))


def test_phase_1b_only_expands(pu_dataset, simple_config):
    without = pu_engine.run_two_step(
        simple_config.with_value("flag_1b", False), pu_dataset, seed=2
    )
    with_1b = pu_engine.run_two_step(
        simple_config.with_value("flag_1b", True)
        .with_value("threshold_1b", 0.5),
        pu_dataset, seed=2,
    )
    assert with_1b.rn_size_1a + with_1b.rn_size_1b >= without.rn_size_1a
    assert with_1b.rn_size_1b >= 0


def test_spy_variant_runs_and_mines_negatives(pu_dataset, simple_config):
    cfg = (simple_config.with_value("spy_flag", True)
           .with_value("spy_rate", 0.2)
           .with_value("spy_tolerance", 0.05))
    model = pu_engine.run_two_step(cfg, pu_dataset, seed=0)
    assert not model.failed
    assert model.rn_size_1a > 0
    # spies are restored: the model still recognises the labelled positives
    pred = model.predict(pu_dataset.features)
    assert np.mean(pred[pu_dataset.s == 1]) > 0.9


def test_empty_rn_set_flags_failure_and_predicts_positive(simple_config):
    # identical feature vectors: every probability collapses to the class
    # prior, far above a 0.05 threshold, so no reliable negatives appear
    X = np.ones((30, 2))
    s = np.zeros(30, dtype=int)
    s[:10] = 1
    data = PUDataset(X, s)
    cfg = (simple_config.with_value("threshold_1a", 0.05)
           .with_value("flag_1b", False)
           .with_value("classifier_1a", "gaussian_nb"))
    model = pu_engine.run_two_step(cfg, data, seed=0)
    assert model.failed
    assert model.rn_size_1a == 0
    assert np.all(model.predict(X) == 1)
    assert np.all(model.predict_proba(X) == 1.0)
    assert any("empty reliable-negative set" in d for d in model.diagnostics)


def test_rn_indices_stay_inside_unlabelled_set(pu_dataset, simple_config):
    rng = np.random.default_rng(0)
    P = pu_dataset.positive_indices
    U = pu_dataset.unlabelled_indices
    rn, remaining, _ = pu_engine.phase_1a(P, U, simple_config, pu_dataset, rng)
    assert set(rn.indices) <= set(U)
    assert set(remaining) == set(U) - set(rn.indices)
    assert all(phase == "1A" for phase in rn.phase.values())


def test_reliable_negative_set_dedupes():
    rn = pu_engine.ReliableNegativeSet()
    rn.add([1, 2, 3], "1A")
    rn.add([3, 4], "1B")
    assert sorted(rn.indices) == [1, 2, 3, 4]
    assert rn.phase[3] == "1A"
    assert rn.phase[4] == "1B"
    assert len(rn) == 4


def test_iteration_count_clamp_in_pipeline(simple_config):
    ds = make_blobs(n=30, seed=9)
    s = np.where(ds.labels == 1, 1, 0)
    # keep only 4 unlabelled instances so iteration_count_1a=10 must clamp
    keep = np.concatenate([np.flatnonzero(s == 1), np.flatnonzero(s == 0)[:4]])
    data = PUDataset(ds.features[keep], s[keep])
    cfg = simple_config.with_value("iteration_count_1a", 10)
    model = pu_engine.run_two_step(cfg, data, seed=0)
    assert any("clamped" in d for d in model.diagnostics)
