"""Experiment specification and the driver tying datasets, systems and the
nested cross-validation harness together."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import baselines, classifiers, evaluation, pu_engine, search
from .core_types import Dataset, SearchSpace, default_space

AUTO_SYSTEMS = ("ga", "bo", "ebo")
BASELINE_SYSTEMS = ("sem", "dfpu")
KNOWN_SYSTEMS = AUTO_SYSTEMS + BASELINE_SYSTEMS

_PARAM_TYPES = {"ga": search.GAParams, "bo": search.BOParams, "ebo": search.EBOParams}
_RUNNERS = {"ga": search.run_ga, "bo": search.run_bo, "ebo": search.run_ebo}


class SpecError(ValueError):
    pass


class IngestionError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    """Declarative description of one experiment grid."""

    dataset_path: str
    label_column: str
    deltas: List[float] = field(default_factory=lambda: [0.2, 0.4, 0.6])
    systems: Dict[str, dict] = field(default_factory=lambda: {"ga": {}})
    variant: str = "base"
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    registry: Optional[List[str]] = None
    missing_policy: str = "error"  # "error" | "impute-mean"
    dataset_id: Optional[str] = None

    def __post_init__(self):
        for system in self.systems:
            if system not in KNOWN_SYSTEMS:
                raise SpecError(f"unknown system: {system}")
        for delta in self.deltas:
            if not 0 < delta < 1:
                raise SpecError(f"delta {delta} outside (0, 1)")
        if self.variant not in ("base", "extended"):
            raise SpecError(f"unknown search-space variant: {self.variant}")
        if self.dataset_id is None:
            self.dataset_id = Path(self.dataset_path).stem

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        try:
            return cls(**raw)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc

    def to_payload(self):
        return {
            "dataset_path": self.dataset_path,
            "label_column": self.label_column,
            "deltas": self.deltas,
            "systems": self.systems,
            "variant": self.variant,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "registry": self.registry,
            "missing_policy": self.missing_policy,
            "dataset_id": self.dataset_id,
        }


def ingest_csv(path, label_column, missing_policy="error") -> Dataset:
    """Load a CSV with a header row into a validated Dataset.

    Feature columns must be numeric; the label column binary. Missing cells
    are an error unless the policy is impute-mean.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty file") from None
        rows = list(reader)
    if label_column not in header:
        raise IngestionError(f"label column {label_column!r} not in header")
    label_idx = header.index(label_column)
    feature_names = [h for i, h in enumerate(header) if i != label_idx]

    n = len(rows)
    if n == 0:
        raise IngestionError("no data rows")
    features = np.full((n, len(feature_names)), np.nan)
    labels = np.empty(n, dtype=float)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise IngestionError(f"row {r + 2}: expected {len(header)} cells")
        c_out = 0
        for c, cell in enumerate(row):
            cell = cell.strip()
            if c == label_idx:
                if cell == "":
                    raise IngestionError(f"row {r + 2}, column {header[c]!r}: missing label")
                labels[r] = float(cell)
                continue
            if cell == "":
                if missing_policy != "impute-mean":
                    raise IngestionError(
                        f"row {r + 2}, column {header[c]!r}: missing value"
                    )
            else:
                try:
                    features[r, c_out] = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"row {r + 2}, column {header[c]!r}: non-numeric value {cell!r}"
                    ) from None
            c_out += 1
    if missing_policy == "impute-mean":
        col_means = np.nanmean(features, axis=0)
        mask = np.isnan(features)
        features[mask] = np.take(col_means, np.nonzero(mask)[1])
    if np.isnan(features).any():
        raise IngestionError("missing values remain after ingestion")
    unique = set(np.unique(labels))
    if not unique <= {0.0, 1.0}:
        raise IngestionError(f"label column is not binary: values {sorted(unique)}")
    return Dataset(features, labels.astype(int), names=feature_names)


def ingest_report(dataset: Dataset):
    return {
        "instances": dataset.n_instances,
        "features": dataset.n_features,
        "positive_percent": round(100.0 * dataset.positive_fraction, 2),
    }


def build_space(spec: ExperimentSpec) -> SearchSpace:
    registry = spec.registry or classifiers.registry()
    return default_space(spec.variant, registry)


def make_system_runner(system, params, space: SearchSpace, workers=1):
    """``(pu_train, seed) -> (best_record, best_score, n_evals, model)``
    for one system id."""
    if system in AUTO_SYSTEMS:
        search_params = _PARAM_TYPES[system](**params)
        run = _RUNNERS[system]

        def runner(pu_train, seed):
            def objective_fn(config):
                return evaluation.objective(config, pu_train, seed)

            best, trace = run(space, objective_fn, search_params, seed)
            final = pu_engine.run_two_step(best.config, pu_train, seed)
            return (best.config.to_record(), best.score,
                    trace.n_evaluations, final)

        return runner

    if system in BASELINE_SYSTEMS:
        def runner(pu_train, seed):
            cell, score, model, n_evals = baselines.grid_search(
                system, pu_train, seed
            )
            record = dict(zip(_grid_field_names(system), cell))
            return record, score, n_evals, model

        return runner

    raise SpecError(f"unknown system: {system}")


def _grid_field_names(system):
    return (("spy_rate", "spy_tolerance") if system == "sem"
            else ("rn_rate", "iteration_count"))


def run_experiment(spec: ExperimentSpec, dataset: Dataset = None,
                   progress=None):
    """Run every (system, delta) cell of the spec; one RunResult file per
    cell plus a manifest sufficient to reproduce the run."""
    if dataset is None:
        dataset = ingest_csv(spec.dataset_path, spec.label_column,
                             spec.missing_policy)
    space = build_space(spec)
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    registry_hash = hashlib.sha256(
        ",".join(space.classifier_registry).encode()
    ).hexdigest()[:16]
    manifest = {
        "spec": spec.to_payload(),
        "seed": spec.seed,
        "registry": list(space.classifier_registry),
        "registry_hash": registry_hash,
        "code_version": _code_version(),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )

    results = []
    for system, params in spec.systems.items():
        runner = make_system_runner(system, params, space, spec.workers)
        for delta in spec.deltas:
            result = evaluation.nested_cv(
                system, runner, dataset, delta, spec.seed,
                dataset_id=spec.dataset_id, variant=spec.variant,
            )
            name = f"{spec.dataset_id}_{system}_delta{int(round(delta * 100))}_seed{spec.seed}.json"
            (out / name).write_text(result.to_json(), encoding="utf-8")
            results.append(result)
            if progress is not None:
                progress(result)
    _write_summary_csv(out / "summary.csv", results)
    return results


def _write_summary_csv(path, results):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "system", "delta", "seed",
                         "f_measure", "precision", "recall"])
        for r in results:
            writer.writerow([r.dataset_id, r.system, r.delta, r.seed,
                             f"{r.mean_f_measure:.6f}",
                             f"{r.mean_precision:.6f}",
                             f"{r.mean_recall:.6f}"])


def _code_version():
    from . import __version__

    return __version__


def load_results(paths) -> List[evaluation.RunResult]:
    results = []
    for path in paths:
        text = Path(path).read_text(encoding="utf-8")
        results.append(evaluation.RunResult.from_json(text))
    return results
