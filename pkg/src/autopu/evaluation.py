"""PU dataset engineering, stratified folds, the search objective, metrics,
and the nested cross-validation experiment driver."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, List, Optional

import numpy as np

from . import pu_engine
from .core_types import CandidateConfig, Dataset, PUDataset

SCHEMA_VERSION = 1

INTERNAL_FOLDS = 5
EXTERNAL_FOLDS = 5


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_predictions(cls, y_true, y_pred):
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        return cls(
            tp=int(np.sum((y_pred == 1) & (y_true == 1))),
            fp=int(np.sum((y_pred == 1) & (y_true == 0))),
            fn=int(np.sum((y_pred == 0) & (y_true == 1))),
            tn=int(np.sum((y_pred == 0) & (y_true == 0))),
        )


def metrics(counts: ConfusionCounts):
    """(precision, recall, F-measure) with the zero-denominator convention:
    each term is 0 when its denominator vanishes."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall > 0:
        f_measure = 2 * precision * recall / (precision + recall)
    else:
        f_measure = 0.0
    return precision, recall, f_measure


@dataclass(frozen=True)
class FoldPlan:
    """Per-instance fold assignments, stratified on the given key."""

    assignments: np.ndarray
    k: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "assignments",
                           np.asarray(self.assignments, dtype=int))

    def test_indices(self, fold):
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignments != fold)

    def payload(self):
        return {"k": self.k, "seed": self.seed,
                "assignments": self.assignments.tolist()}


def stratified_kfold(keys, k, seed) -> FoldPlan:
    """Deterministic stratified fold plan; per-fold stratum counts differ
    from perfect proportionality by at most 1. Strata smaller than k are
    spread round-robin."""
    if k < 2:
        raise ValueError("k must be >= 2")
    keys = np.asarray(keys)
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(keys), dtype=int)
    for stratum in np.unique(keys):
        idx = np.flatnonzero(keys == stratum)
        idx = rng.permutation(idx)
        offset = int(rng.integers(k))
        assignments[idx] = (np.arange(len(idx)) + offset) % k
    return FoldPlan(assignments, k, seed)


def engineer_pu(train: Dataset, delta, seed) -> PUDataset:
    """Hide round(delta * #positives) positives in the unlabelled set.

    Rounding is half-up. Features and true labels are untouched; only the
    annotation s is produced.
    """
    if not 0 <= delta < 1:
        raise ValueError("delta must be in [0, 1)")
    pos = np.flatnonzero(train.labels == 1)
    n_hidden = int(np.floor(delta * len(pos) + 0.5))
    if n_hidden >= len(pos):
        raise ValueError("delta would hide every positive instance")
    rng = np.random.default_rng(seed)
    hidden = rng.choice(pos, size=n_hidden, replace=False)
    s = np.zeros(train.n_instances, dtype=int)
    s[pos] = 1
    s[hidden] = 0
    return PUDataset(train.features, s, y_true=train.labels)


def cv_objective(build_model: Callable, pu_train: PUDataset, seed) -> float:
    """Mean F-measure over 5 internal folds stratified on the annotation s.

    Held-out folds are scored treating s as the class label (the only label
    available during search); a failure-flagged model contributes 0 for its
    fold. True labels are stripped before any model sees the data.
    """
    blind = pu_train.without_y_true()
    plan = stratified_kfold(blind.s, INTERNAL_FOLDS, seed)
    scores = []
    for fold in range(INTERNAL_FOLDS):
        tr = plan.train_indices(fold)
        te = plan.test_indices(fold)
        try:
            fold_train = PUDataset(blind.features[tr], blind.s[tr], None)
        except ValueError:
            scores.append(0.0)  # degenerate fold (single annotation value)
            continue
        model = build_model(fold_train, seed)
        if model.failed:
            scores.append(0.0)
            continue
        pred = model.predict(blind.features[te])
        counts = ConfusionCounts.from_predictions(blind.s[te], pred)
        scores.append(metrics(counts)[2])
    return float(np.mean(scores))


def objective(config: CandidateConfig, pu_train: PUDataset, seed) -> float:
    """Search fitness of a candidate configuration."""
    return cv_objective(
        lambda data, s: pu_engine.run_two_step(config, data, s), pu_train, seed
    )


@dataclass
class FoldResult:
    fold: int
    best_config: dict
    best_objective: float
    precision: float
    recall: float
    f_measure: float
    n_evaluations: int
    wall_clock_s: float
    failed: bool = False


@dataclass
class RunResult:
    """Per-external-fold outcomes for one (system, dataset, delta, seed)."""

    dataset_id: str
    delta: float
    system: str
    variant: str
    seed: int
    folds: List[FoldResult] = field(default_factory=list)
    fold_plan: Optional[dict] = None
    schema_version: int = SCHEMA_VERSION

    @property
    def mean_f_measure(self):
        return float(np.mean([f.f_measure for f in self.folds])) if self.folds else 0.0

    @property
    def mean_precision(self):
        return float(np.mean([f.precision for f in self.folds])) if self.folds else 0.0

    @property
    def mean_recall(self):
        return float(np.mean([f.recall for f in self.folds])) if self.folds else 0.0

    def to_payload(self, include_timing=True):
        payload = {
            "schema_version": self.schema_version,
            "dataset_id": self.dataset_id,
            "delta": self.delta,
            "system": self.system,
            "variant": self.variant,
            "seed": self.seed,
            "fold_plan": self.fold_plan,
            "folds": [asdict(f) for f in self.folds],
            "aggregates": {
                "f_measure": self.mean_f_measure,
                "precision": self.mean_precision,
                "recall": self.mean_recall,
            },
        }
        if not include_timing:
            for f in payload["folds"]:
                f.pop("wall_clock_s", None)
        return payload

    def to_json(self, include_timing=True):
        return json.dumps(self.to_payload(include_timing), sort_keys=True, indent=2)

    @classmethod
    def from_payload(cls, payload):
        folds = [FoldResult(**{**f, "wall_clock_s": f.get("wall_clock_s", 0.0)})
                 for f in payload["folds"]]
        return cls(
            dataset_id=payload["dataset_id"],
            delta=payload["delta"],
            system=payload["system"],
            variant=payload["variant"],
            seed=payload["seed"],
            folds=folds,
            fold_plan=payload.get("fold_plan"),
            schema_version=payload.get("schema_version", SCHEMA_VERSION),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_payload(json.loads(text))


def external_fold_plan(dataset: Dataset, seed) -> FoldPlan:
    """Fold plan shared by every system run on (dataset, seed)."""
    return stratified_kfold(dataset.labels, EXTERNAL_FOLDS, seed)


def nested_cv(system_id, system_runner, dataset: Dataset, delta, seed,
              dataset_id="dataset", variant="base") -> RunResult:
    """Nested cross-validation: external stratified 5-fold on true labels,
    PU engineering and the system's search on each training portion, test
    scoring of the resulting model on the untouched fold.

    ``system_runner(pu_train, seed) ->
    (best_record, best_score, n_evaluations, final_model)`` where the final
    model was trained on the full engineered training portion. The external
    fold plan and the engineered annotation depend only on (dataset, delta,
    seed), so every system run with the same triple consumes identical
    folds and identical PU training data.
    """
    plan = external_fold_plan(dataset, seed)
    result = RunResult(dataset_id=dataset_id, delta=delta, system=system_id,
                       variant=variant, seed=seed, fold_plan=plan.payload())
    for fold in range(EXTERNAL_FOLDS):
        start = time.perf_counter()
        tr = plan.train_indices(fold)
        te = plan.test_indices(fold)
        train = Dataset(dataset.features[tr], dataset.labels[tr])
        try:
            pu_train = engineer_pu(train, delta, seed)
            best_record, best_score, n_evals, final = system_runner(
                pu_train, seed + fold
            )
            pred = final.predict(dataset.features[te])
            counts = ConfusionCounts.from_predictions(dataset.labels[te], pred)
            precision, recall, f_measure = metrics(counts)
            result.folds.append(FoldResult(
                fold=fold,
                best_config=best_record,
                best_objective=best_score,
                precision=precision,
                recall=recall,
                f_measure=f_measure,
                n_evaluations=n_evals,
                wall_clock_s=time.perf_counter() - start,
            ))
        except Exception as exc:  # fold failure is isolated, run continues
            result.folds.append(FoldResult(
                fold=fold, best_config={"error": str(exc)}, best_objective=0.0,
                precision=0.0, recall=0.0, f_measure=0.0,
                n_evaluations=0, wall_clock_s=time.perf_counter() - start,
                failed=True,
            ))
    return result
