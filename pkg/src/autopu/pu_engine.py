"""Execution of a candidate configuration as a concrete two-step PU pipeline.

Phase 1A mines reliable negatives from the unlabelled set (optionally
calibrating the probability threshold with spies), Phase 1B optionally
expands that set, and Phase 2 fits the final classifier on positives vs
reliable negatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import classifiers
from .core_types import CandidateConfig, PUDataset


@dataclass
class ReliableNegativeSet:
    """Indices (into the dataset) judged reliable negatives, with provenance."""

    indices: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    phase: dict = field(default_factory=dict)  # index -> "1A" | "1B"

    def add(self, new_indices, phase):
        new_indices = np.asarray(new_indices, dtype=int)
        fresh = new_indices[~np.isin(new_indices, self.indices)]
        self.indices = np.concatenate([self.indices, fresh])
        for i in fresh:
            self.phase[int(i)] = phase

    def __len__(self):
        return len(self.indices)


@dataclass
class PUModel:
    """Fitted Phase 2 model plus the config that produced it.

    A failure-flagged model (empty reliable-negative set or classifier
    failure) predicts all-positive by convention; its search fitness is 0.
    """

    config: CandidateConfig
    model: Optional[classifiers.TrainedModel]
    rn_size_1a: int
    rn_size_1b: int
    failed: bool = False
    diagnostics: List[str] = field(default_factory=list)

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        if self.failed or self.model is None:
            return np.ones(X.shape[0])
        return classifiers.predict_proba(self.model, X)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)


def split_unlabelled(unlabelled_indices, n, rng):
    """Shuffle and partition into n subsets whose sizes differ by at most 1.

    n is clamped to the number of indices when the set is too small; the
    clamp is reported through the returned diagnostics list.
    """
    unlabelled_indices = np.asarray(unlabelled_indices, dtype=int)
    diagnostics = []
    if n < 1:
        raise ValueError("iteration count must be >= 1")
    if len(unlabelled_indices) < n:
        diagnostics.append(
            f"iteration count {n} clamped to {len(unlabelled_indices)} unlabelled instances"
        )
        n = len(unlabelled_indices)
    shuffled = rng.permutation(unlabelled_indices)
    return [np.sort(part) for part in np.array_split(shuffled, n)], diagnostics


def spy_threshold(spy_probs, tolerance):
    """Largest threshold leaving at most ``tolerance`` of spies strictly below.

    Returns the (m+1)-th smallest spy probability with m = floor(tolerance * n);
    if m >= n every spy is tolerated and the threshold exceeds all of them.
    """
    spy_probs = np.sort(np.asarray(spy_probs, dtype=float))
    n = len(spy_probs)
    if n < 1:
        raise ValueError("need at least one spy probability")
    if not 0 <= tolerance <= 1:
        raise ValueError("tolerance must be in [0, 1]")
    m = int(np.floor(tolerance * n))
    if m >= n:
        return float(spy_probs[-1]) + 1e-9
    return float(spy_probs[m])


def _spy_count(spy_rate, n_positives):
    return max(1, int(np.floor(spy_rate * n_positives)))


def phase_1a(P, U, config, data, rng):
    """Extract the initial reliable-negative set from the unlabelled indices.

    Trains ``classifier_1a`` on positives vs each unlabelled subset in turn;
    subset members scored strictly below the effective threshold move to the
    reliable-negative set. With ``spy_flag`` the threshold is recomputed per
    iteration from that iteration's spy scores, and spies are restored to the
    positive set afterwards.
    """
    P = np.asarray(P, dtype=int)
    U = np.asarray(U, dtype=int)
    X = data.features
    rn = ReliableNegativeSet()
    diagnostics = []

    spies = np.array([], dtype=int)
    P_eff = P
    if config.spy_flag:
        n_spies = _spy_count(config.spy_rate, len(P))
        spies = rng.choice(P, size=n_spies, replace=False)
        P_eff = P[~np.isin(P, spies)]
        if len(P_eff) == 0:
            diagnostics.append("all positives chosen as spies; spy step skipped")
            spies = np.array([], dtype=int)
            P_eff = P

    subsets, diag = split_unlabelled(U, config.iteration_count_1a, rng)
    diagnostics.extend(diag)

    seed = int(rng.integers(2**31 - 1))
    for it, U_i in enumerate(subsets):
        if len(U_i) == 0:
            continue
        neg = np.concatenate([U_i, spies]) if len(spies) else U_i
        train_idx = np.concatenate([P_eff, neg])
        targets = np.concatenate([np.ones(len(P_eff), dtype=int),
                                  np.zeros(len(neg), dtype=int)])
        try:
            model = classifiers.fit(config.classifier_1a, X[train_idx], targets,
                                    seed + it)
            if len(spies):
                threshold = spy_threshold(
                    classifiers.predict_proba(model, X[spies]), config.spy_tolerance
                )
            else:
                threshold = config.threshold_1a
            probs = classifiers.predict_proba(model, X[U_i])
        except classifiers.ClassifierError as exc:
            diagnostics.append(f"phase 1A iteration {it} classifier failure: {exc}")
            continue
        rn.add(U_i[probs < threshold], "1A")

    remaining = U[~np.isin(U, rn.indices)]
    return rn, remaining, diagnostics


def phase_1b(P, rn, remaining_U, config, data, seed):
    """Single-pass expansion: positives vs current reliable negatives score
    the remaining unlabelled instances; low scorers join the set."""
    diagnostics = []
    if len(rn) == 0:
        diagnostics.append("phase 1B skipped: reliable-negative set empty")
        return rn, diagnostics
    remaining_U = np.asarray(remaining_U, dtype=int)
    if len(remaining_U) == 0:
        return rn, diagnostics
    X = data.features
    train_idx = np.concatenate([P, rn.indices])
    targets = np.concatenate([np.ones(len(P), dtype=int),
                              np.zeros(len(rn), dtype=int)])
    try:
        model = classifiers.fit(config.classifier_1b, X[train_idx], targets, seed)
        probs = classifiers.predict_proba(model, X[remaining_U])
    except classifiers.ClassifierError as exc:
        diagnostics.append(f"phase 1B classifier failure: {exc}")
        return rn, diagnostics
    rn.add(remaining_U[probs < config.threshold_1b], "1B")
    return rn, diagnostics


def run_two_step(config, pu_train: PUDataset, seed) -> PUModel:
    """Compose Phase 1A, optional Phase 1B, and the Phase 2 fit.

    Pure function of (config, data, seed); instances in neither the positive
    nor the reliable-negative set are unused by Phase 2 training.
    """
    rng = np.random.default_rng(seed)
    P = pu_train.positive_indices
    U = pu_train.unlabelled_indices
    X = pu_train.features

    rn, remaining, diagnostics = phase_1a(P, U, config, pu_train, rng)
    size_1a = len(rn)
    if config.flag_1b:
        rn, diag = phase_1b(P, rn, remaining, config, pu_train,
                            int(rng.integers(2**31 - 1)))
        diagnostics.extend(diag)
    size_1b = len(rn) - size_1a

    if len(rn) == 0:
        diagnostics.append("empty reliable-negative set: config flagged as failed")
        return PUModel(config, None, 0, 0, failed=True, diagnostics=diagnostics)

    train_idx = np.concatenate([P, rn.indices])
    targets = np.concatenate([np.ones(len(P), dtype=int),
                              np.zeros(len(rn), dtype=int)])
    try:
        model = classifiers.fit(config.classifier_2, X[train_idx], targets,
                                int(rng.integers(2**31 - 1)))
    except classifiers.ClassifierError as exc:
        diagnostics.append(f"phase 2 classifier failure: {exc}")
        return PUModel(config, None, size_1a, size_1b, failed=True,
                       diagnostics=diagnostics)
    return PUModel(config, model, size_1a, size_1b, diagnostics=diagnostics)
