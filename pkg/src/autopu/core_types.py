"""Datasets, search spaces and candidate pipeline configurations.

A candidate configuration fixes every hyperparameter of a two-step PU
learning pipeline: Phase 1A reliable-negative mining, the optional Phase 1B
expansion, the Phase 2 classifier, and (in the extended space) the spy
mechanism that overrides the Phase 1A threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

# Candidate-value lists. Thresholds are built from scaled integers so that
# membership checks never hit float-representation mismatches.
ITERATION_COUNTS_1A = tuple(range(1, 11))
THRESHOLDS = tuple(i / 100 for i in range(5, 51, 5))
SPY_RATES = tuple(i / 100 for i in range(5, 36, 5))
SPY_TOLERANCES = (0.0,) + tuple(i / 100 for i in range(1, 11))

_FLOAT_TOL = 1e-9


class InvalidSpaceError(ValueError):
    """Raised for a malformed search space (e.g. an empty candidate list)."""


class ConfigParseError(ValueError):
    """Raised when a serialized config record is malformed."""

    def __init__(self, field_name, message):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class Dataset:
    """Fully labelled binary dataset (1 = positive, 0 = negative)."""

    features: np.ndarray
    labels: np.ndarray
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if features.shape[0] != labels.shape[0]:
            raise ValueError("row count of features must equal length of labels")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite values")
        if not set(np.unique(labels)) <= {0, 1}:
            raise ValueError("labels must be binary (0/1)")

    @property
    def n_instances(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def positive_fraction(self):
        return float(np.mean(self.labels == 1))


@dataclass(frozen=True)
class PUDataset:
    """Positive-unlabelled view: s = 1 labelled positive, s = 0 unlabelled.

    ``y_true`` is carried only for engineered datasets and test-set scoring;
    it is stripped before any search-time evaluation.
    """

    features: np.ndarray
    s: np.ndarray
    y_true: Optional[np.ndarray] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        s = np.asarray(self.s, dtype=int)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "s", s)
        if features.shape[0] != s.shape[0]:
            raise ValueError("row count of features must equal length of s")
        if not set(np.unique(s)) <= {0, 1}:
            raise ValueError("s must be binary (0/1)")
        if np.sum(s == 1) < 1 or np.sum(s == 0) < 1:
            raise ValueError("need at least one labelled positive and one unlabelled instance")
        if self.y_true is not None:
            y = np.asarray(self.y_true, dtype=int)
            object.__setattr__(self, "y_true", y)
            if y.shape[0] != s.shape[0]:
                raise ValueError("y_true length mismatch")
            if np.any((s == 1) & (y != 1)):
                raise ValueError("every labelled positive must have y_true = 1")

    def without_y_true(self):
        """Search-time view: identical data, no access to true labels."""
        return PUDataset(self.features, self.s, None)

    @property
    def positive_indices(self):
        return np.flatnonzero(self.s == 1)

    @property
    def unlabelled_indices(self):
        return np.flatnonzero(self.s == 0)


# Field order matters: it is the gene order for crossover/mutation and the
# column order of serialized records.
BASE_FIELDS = (
    "iteration_count_1a",
    "threshold_1a",
    "classifier_1a",
    "threshold_1b",
    "classifier_1b",
    "flag_1b",
    "classifier_2",
)
SPY_FIELDS = ("spy_flag", "spy_rate", "spy_tolerance")
ALL_FIELDS = BASE_FIELDS + SPY_FIELDS


@dataclass(frozen=True)
class CandidateConfig:
    """One point in the search space (a full two-step pipeline spec).

    Spy fields are always carried; with ``spy_flag`` False they are inert,
    which is also the fixed state for base-space configs.
    """

    iteration_count_1a: int
    threshold_1a: float
    classifier_1a: str
    threshold_1b: float
    classifier_1b: str
    flag_1b: bool
    classifier_2: str
    spy_flag: bool = False
    spy_rate: float = SPY_RATES[0]
    spy_tolerance: float = SPY_TOLERANCES[0]

    def get(self, field_name):
        return getattr(self, field_name)

    def with_value(self, field_name, value):
        return replace(self, **{field_name: value})

    def key(self):
        """Hashable identity used for fitness memoisation."""
        return tuple(getattr(self, f) for f in ALL_FIELDS)

    def to_record(self):
        """Flat key/value document with stable field names."""
        return {f: getattr(self, f) for f in ALL_FIELDS}

    def to_json(self):
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_record(cls, record):
        kwargs = {}
        for f in BASE_FIELDS:
            if f not in record:
                raise ConfigParseError(f, "missing field")
            kwargs[f] = record[f]
        for f in SPY_FIELDS:
            if f in record:
                kwargs[f] = record[f]
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigParseError("record", str(exc)) from exc
        _check_field_types(cfg)
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            record = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError("record", f"invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise ConfigParseError("record", "expected a JSON object")
        return cls.from_record(record)


def _check_field_types(cfg):
    if not isinstance(cfg.iteration_count_1a, int) or isinstance(cfg.iteration_count_1a, bool):
        raise ConfigParseError("iteration_count_1a", "expected integer")
    for f in ("threshold_1a", "threshold_1b", "spy_rate", "spy_tolerance"):
        if not isinstance(cfg.get(f), (int, float)) or isinstance(cfg.get(f), bool):
            raise ConfigParseError(f, "expected number")
    for f in ("classifier_1a", "classifier_1b", "classifier_2"):
        if not isinstance(cfg.get(f), str):
            raise ConfigParseError(f, "expected string")
    for f in ("flag_1b", "spy_flag"):
        if not isinstance(cfg.get(f), bool):
            raise ConfigParseError(f, "expected boolean")


@dataclass(frozen=True)
class SearchSpace:
    """Candidate-value lists for every hyperparameter, base or extended."""

    variant: str  # "base" | "extended"
    classifier_registry: tuple
    iteration_counts_1a: tuple = ITERATION_COUNTS_1A
    thresholds_1a: tuple = THRESHOLDS
    thresholds_1b: tuple = THRESHOLDS
    flags_1b: tuple = (True, False)
    spy_flags: tuple = (True, False)
    spy_rates: tuple = SPY_RATES
    spy_tolerances: tuple = SPY_TOLERANCES

    def __post_init__(self):
        if self.variant not in ("base", "extended"):
            raise InvalidSpaceError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "classifier_registry", tuple(self.classifier_registry))
        for name in ("iteration_counts_1a", "thresholds_1a", "thresholds_1b",
                     "flags_1b", "classifier_registry"):
            if len(getattr(self, name)) == 0:
                raise InvalidSpaceError(f"empty candidate list: {name}")
        if self.variant == "extended":
            for name in ("spy_flags", "spy_rates", "spy_tolerances"):
                if len(getattr(self, name)) == 0:
                    raise InvalidSpaceError(f"empty candidate list: {name}")

    @property
    def is_extended(self):
        return self.variant == "extended"

    def candidates(self, field_name):
        table = {
            "iteration_count_1a": self.iteration_counts_1a,
            "threshold_1a": self.thresholds_1a,
            "classifier_1a": self.classifier_registry,
            "threshold_1b": self.thresholds_1b,
            "classifier_1b": self.classifier_registry,
            "flag_1b": self.flags_1b,
            "classifier_2": self.classifier_registry,
            "spy_flag": self.spy_flags,
            "spy_rate": self.spy_rates,
            "spy_tolerance": self.spy_tolerances,
        }
        return table[field_name]

    def gene_fields(self):
        """Fields the search actually varies for this variant."""
        return ALL_FIELDS if self.is_extended else BASE_FIELDS


def _in_list(value, candidates):
    if isinstance(value, bool) or isinstance(value, str):
        return value in candidates
    return any(abs(value - c) <= _FLOAT_TOL for c in candidates)


def search_space_size(space: SearchSpace) -> int:
    """Product of candidate-list cardinalities for the space's variant."""
    size = 1
    for f in space.gene_fields():
        size *= len(space.candidates(f))
    return size


def random_config(space: SearchSpace, rng: np.random.Generator) -> CandidateConfig:
    """Uniform independent draw of every gene from its candidate list."""
    kwargs = {}
    for f in space.gene_fields():
        cands = space.candidates(f)
        kwargs[f] = cands[int(rng.integers(len(cands)))]
    return CandidateConfig(**kwargs)


def validate_config(config: CandidateConfig, space: SearchSpace):
    """Return a list of violation messages; empty means the config is valid."""
    violations = []
    for f in space.gene_fields():
        if not _in_list(config.get(f), space.candidates(f)):
            violations.append(f"{f}: value {config.get(f)!r} not in candidate list")
    if not space.is_extended and config.spy_flag:
        violations.append("spy_flag: must be False in the base search space")
    return violations


def default_space(variant="base", registry=None):
    """Space with the default candidate lists and the given registry."""
    if registry is None:
        from . import classifiers

        registry = classifiers.registry()
    return SearchSpace(variant=variant, classifier_registry=tuple(registry))
