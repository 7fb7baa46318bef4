"""Shared fixtures: synthetic separable datasets, engineered PU views, and
small search spaces that keep the suite fast."""

import hashlib

import numpy as np
import pytest

from autopu import evaluation
from autopu.core_types import CandidateConfig, Dataset, SearchSpace

FAST_KEYS = ("gaussian_nb", "logistic_regression", "decision_tree")


def make_blobs(n=200, n_features=4, pos_frac=0.5, gap=2.5, seed=0):
    """Two well-separated Gaussian blobs; class 1 sits at +gap, class 0 at -gap."""
    rng = np.random.default_rng(seed)
    n_pos = int(round(pos_frac * n))
    n_neg = n - n_pos
    features = np.vstack([
        rng.normal(gap, 1.0, (n_pos, n_features)),
        rng.normal(-gap, 1.0, (n_neg, n_features)),
    ])
    labels = np.concatenate([np.ones(n_pos, dtype=int), np.zeros(n_neg, dtype=int)])
    perm = rng.permutation(n)
    return Dataset(features[perm], labels[perm])


def synthetic_objective(config):
    """Deterministic pseudo-random score in [0, 1) from the config identity.

    Cheap stand-in for the real pipeline objective in budget and
    memoisation tests.
    """
    digest = hashlib.md5(repr(config.key()).encode()).hexdigest()
    return int(digest[:12], 16) / 16**12


@pytest.fixture(scope="session")
def blob_dataset():
    return make_blobs(n=200, n_features=4, seed=0)


@pytest.fixture(scope="session")
def pu_dataset(blob_dataset):
    return evaluation.engineer_pu(blob_dataset, 0.4, seed=1)


@pytest.fixture(scope="session")
def fast_space():
    return SearchSpace(variant="base", classifier_registry=FAST_KEYS)


@pytest.fixture
def simple_config():
    return CandidateConfig(
        iteration_count_1a=3,
        threshold_1a=0.3,
        classifier_1a="gaussian_nb",
        threshold_1b=0.2,
        classifier_1b="logistic_regression",
        flag_1b=True,
        classifier_2="decision_tree",
    )
