"""Baseline PU methods: spy-with-EM (S-EM) and the deep-forest two-step
method (DF-PU), each with its grid-search tuning protocol."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import List, Tuple

import numpy as np

from . import classifiers, pu_engine
from .core_types import PUDataset, SPY_RATES, SPY_TOLERANCES, CandidateConfig
from .evaluation import cv_objective
from .pu_engine import PUModel, split_unlabelled, spy_threshold

DFPU_RN_RATES = (0.01, 0.03, 0.05, 0.07, 0.09, 0.11, 0.13, 0.15, 0.17, 0.2)
DFPU_ITERATION_COUNTS = tuple(range(1, 11))

EM_MAX_ROUNDS = 20


@dataclass(frozen=True)
class BaselineGrid:
    method: str
    cells: Tuple[tuple, ...]

    @classmethod
    def for_method(cls, method):
        if method == "sem":
            return cls("sem", tuple(product(SPY_RATES, SPY_TOLERANCES)))
        if method == "dfpu":
            return cls("dfpu", tuple(product(DFPU_RN_RATES, DFPU_ITERATION_COUNTS)))
        raise ValueError(f"unknown baseline method: {method}")


def _placeholder_config(**kwargs):
    # Baselines reuse PUModel, which wants the producing config for
    # diagnostics; the fields not listed are irrelevant to the method.
    defaults = dict(
        iteration_count_1a=1, threshold_1a=0.05, classifier_1a="gaussian_nb",
        threshold_1b=0.05, classifier_1b="gaussian_nb", flag_1b=False,
        classifier_2="gaussian_nb",
    )
    defaults.update(kwargs)
    return CandidateConfig(**defaults)


def run_sem(pu_train: PUDataset, spy_rate, spy_tolerance, seed) -> PUModel:
    """Spy-based reliable-negative mining followed by naive-Bayes EM.

    Step 1 hides floor(spy_rate * |P|) spies in the unlabelled set, fits a
    Gaussian NB on positives vs unlabelled-plus-spies and derives the RN
    threshold from the spy scores. Step 2 runs soft-label EM over the
    non-RN unlabelled instances until hard assignments stabilise or 20
    rounds elapse. The EM round count is recorded in the diagnostics.
    """
    rng = np.random.default_rng(seed)
    X = pu_train.features
    P = pu_train.positive_indices
    U = pu_train.unlabelled_indices
    config = _placeholder_config(spy_flag=True, spy_rate=spy_rate,
                                 spy_tolerance=spy_tolerance)
    diagnostics = []

    n_spies = max(1, int(np.floor(spy_rate * len(P))))
    spies = rng.choice(P, size=n_spies, replace=False)
    P_eff = P[~np.isin(P, spies)]
    if len(P_eff) == 0:
        P_eff, spies = P, np.array([], dtype=int)
        diagnostics.append("all positives chosen as spies; spy step skipped")

    neg = np.concatenate([U, spies]) if len(spies) else U
    train_idx = np.concatenate([P_eff, neg])
    targets = np.concatenate([np.ones(len(P_eff), dtype=int),
                              np.zeros(len(neg), dtype=int)])
    model = classifiers.fit("gaussian_nb", X[train_idx], targets,
                            int(rng.integers(2**31 - 1)))
    if len(spies):
        threshold = spy_threshold(
            classifiers.predict_proba(model, X[spies]), spy_tolerance
        )
    else:
        threshold = 0.5
    probs_U = classifiers.predict_proba(model, X[U])
    RN = U[probs_U < threshold]
    if len(RN) == 0:
        diagnostics.append("empty reliable-negative set: S-EM failed")
        return PUModel(config, None, 0, 0, failed=True, diagnostics=diagnostics)

    # Expectation-maximisation over the remaining unlabelled instances with
    # soft class labels, realised through duplicated weighted rows.
    Q = U[~np.isin(U, RN)]
    em_seed = int(rng.integers(2**31 - 1))
    from sklearn.naive_bayes import GaussianNB

    nb = GaussianNB()
    X_fixed = np.vstack([X[P], X[RN]])
    y_fixed = np.concatenate([np.ones(len(P)), np.zeros(len(RN))])
    nb.fit(X_fixed, y_fixed)
    rounds = 0
    if len(Q):
        def pos_probs(model):
            pos_col = list(model.classes_).index(1)
            return model.predict_proba(X[Q])[:, pos_col]

        q_probs = pos_probs(nb)
        assignment = (q_probs >= 0.5).astype(int)
        for rounds in range(1, EM_MAX_ROUNDS + 1):
            X_em = np.vstack([X_fixed, X[Q], X[Q]])
            y_em = np.concatenate([y_fixed, np.ones(len(Q)), np.zeros(len(Q))])
            w_em = np.concatenate([np.ones(len(y_fixed)), q_probs, 1 - q_probs])
            nb = GaussianNB()
            nb.fit(X_em, y_em, sample_weight=w_em)
            q_probs = pos_probs(nb)
            new_assignment = (q_probs >= 0.5).astype(int)
            if np.array_equal(assignment, new_assignment):
                break
            assignment = new_assignment
    diagnostics.append(f"em_rounds={rounds}")

    trained = classifiers.TrainedModel("gaussian_nb", nb, X.shape[1], seed)
    return PUModel(config, trained, len(RN), 0, diagnostics=diagnostics)


def run_dfpu(pu_train: PUDataset, rn_rate, iteration_count, seed) -> PUModel:
    """Two-step method with the cascade deep forest in both steps; the
    lowest-probability rn_rate fraction of the unlabelled set becomes the
    reliable-negative set."""
    if not 0 < rn_rate < 1:
        raise ValueError("rn_rate must be in (0, 1)")
    if iteration_count < 1:
        raise ValueError("iteration_count must be >= 1")
    rng = np.random.default_rng(seed)
    X = pu_train.features
    P = pu_train.positive_indices
    U = pu_train.unlabelled_indices
    config = _placeholder_config(iteration_count_1a=int(iteration_count),
                                 classifier_1a="deep_forest",
                                 classifier_2="deep_forest")
    diagnostics = []

    subsets, diag = split_unlabelled(U, iteration_count, rng)
    diagnostics.extend(diag)
    probs = np.empty(len(U))
    pos_of = {int(u): i for i, u in enumerate(U)}
    seed0 = int(rng.integers(2**31 - 1))
    for it, U_i in enumerate(subsets):
        if len(U_i) == 0:
            continue
        train_idx = np.concatenate([P, U_i])
        targets = np.concatenate([np.ones(len(P), dtype=int),
                                  np.zeros(len(U_i), dtype=int)])
        model = classifiers.fit("deep_forest", X[train_idx], targets, seed0 + it)
        p = classifiers.predict_proba(model, X[U_i])
        for u, prob in zip(U_i, p):
            probs[pos_of[int(u)]] = prob

    n_rn = int(np.floor(rn_rate * len(U)))
    if n_rn < 1:
        diagnostics.append("reliable-negative set smaller than 1 instance")
        return PUModel(config, None, 0, 0, failed=True, diagnostics=diagnostics)
    order = np.argsort(probs, kind="stable")
    RN = U[order[:n_rn]]

    train_idx = np.concatenate([P, RN])
    targets = np.concatenate([np.ones(len(P), dtype=int),
                              np.zeros(len(RN), dtype=int)])
    model = classifiers.fit("deep_forest", X[train_idx], targets,
                            int(rng.integers(2**31 - 1)))
    return PUModel(config, model, len(RN), 0, diagnostics=diagnostics)


def baseline_builder(method, cell):
    """Model-building callable for one grid cell, usable by cv_objective."""
    if method == "sem":
        spy_rate, spy_tolerance = cell
        return lambda data, seed: run_sem(data, spy_rate, spy_tolerance, seed)
    rn_rate, iteration_count = cell
    return lambda data, seed: run_dfpu(data, rn_rate, iteration_count, seed)


def grid_search(method, pu_train: PUDataset, seed, objective=None):
    """Evaluate every grid cell with the same internal 5-fold objective as
    the Auto-PU systems; argmax mean F-measure, ties broken by grid order.

    ``objective(cell) -> score`` may be injected for testing; the default
    runs the baseline method under cv_objective.
    """
    grid = BaselineGrid.for_method(method)
    if objective is None:
        def objective(cell):
            return cv_objective(baseline_builder(method, cell), pu_train, seed)

    best_cell, best_score = None, -np.inf
    n_evaluations = 0
    for cell in grid.cells:
        score = objective(cell)
        n_evaluations += 1
        if score > best_score:
            best_cell, best_score = cell, score
    model = baseline_builder(method, best_cell)(pu_train, seed)
    return best_cell, best_score, model, n_evaluations
