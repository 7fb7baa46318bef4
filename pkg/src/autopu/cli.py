"""Command-line entry point.

Subcommands: ingest, engineer, run, compare, freq, space. All outputs are
UTF-8 CSV/JSON. Exit codes: 0 success, 2 ingestion failure, 3 validation
failure, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import classifiers, evaluation, experiment, stats
from .core_types import CandidateConfig, default_space, search_space_size

EXIT_OK = 0
EXIT_INGESTION = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


def _default_seed(value):
    if value is not None:
        return value
    env = os.environ.get("PU_AUTOML_SEED")
    return int(env) if env else 0


def cmd_ingest(args):
    dataset = experiment.ingest_csv(args.csv, args.label_column,
                                    args.missing_policy)
    report = experiment.ingest_report(dataset)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_engineer(args):
    dataset = experiment.ingest_csv(args.csv, args.label_column,
                                    args.missing_policy)
    pu = evaluation.engineer_pu(dataset, args.delta,
                                _default_seed(args.seed))
    out = Path(args.output)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        names = list(dataset.names or
                     [f"f{i}" for i in range(dataset.n_features)])
        writer.writerow(names + ["s", "y_true"])
        for i in range(dataset.n_instances):
            writer.writerow(list(pu.features[i]) + [int(pu.s[i]),
                                                    int(pu.y_true[i])])
    print(f"wrote {out} ({int(np.sum(pu.s))} labelled positives, "
          f"{int(np.sum(pu.s == 0))} unlabelled)")
    return EXIT_OK


def cmd_run(args):
    spec = experiment.ExperimentSpec.from_file(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    if args.output_dir:
        spec.output_dir = args.output_dir
    if args.workers is not None:
        spec.workers = args.workers
    if args.deterministic_order:
        spec.workers = 1

    def progress(result):
        for f in result.folds:
            print(f"{result.system} delta={result.delta} fold {f.fold}: "
                  f"best objective {f.best_objective:.4f}, "
                  f"{f.n_evaluations} evaluations, "
                  f"test F {f.f_measure:.4f}")

    experiment.run_experiment(spec, progress=progress)
    print(f"results written to {spec.output_dir}")
    return EXIT_OK


def _collect_metrics(results, metric):
    getter = {
        "f_measure": lambda r: r.mean_f_measure,
        "precision": lambda r: r.mean_precision,
        "recall": lambda r: r.mean_recall,
    }[metric]
    table = defaultdict(dict)
    for r in results:
        table[r.system][f"{r.dataset_id}@{r.delta}"] = getter(r)
    return dict(table)


def cmd_compare(args):
    results = experiment.load_results(args.results)
    table = _collect_metrics(results, args.metric)
    rows = stats.compare_systems(table, args.metric, args.alpha)
    writer = csv.writer(sys.stdout if args.output == "-" else
                        open(args.output, "w", newline="", encoding="utf-8"))
    writer.writerow(["system_a", "system_b", "metric", "rank_a", "rank_b",
                     "p_value", "adjusted_alpha", "significant"])
    for row in rows:
        writer.writerow([row.system_a, row.system_b, row.metric,
                         f"{row.rank_a:.4f}", f"{row.rank_b:.4f}",
                         f"{row.p_value:.6g}", f"{row.adjusted_alpha:.6g}",
                         int(row.significant)])
    return EXIT_OK


def cmd_freq(args):
    results = experiment.load_results(args.results)
    space = default_space(args.variant, args.registry or None)
    configs = []
    for r in results:
        for f in r.folds:
            if not f.failed and "classifier_2" in f.best_config:
                configs.append(CandidateConfig.from_record(f.best_config))
    if not configs:
        raise ValueError("no pipeline configs found in the given results")
    rows = stats.selection_frequency([c.to_record() for c in configs], space)
    writer = csv.writer(sys.stdout if args.output == "-" else
                        open(args.output, "w", newline="", encoding="utf-8"))
    writer.writerow(["hyperparameter", "most_selected", "selection_freq",
                     "baseline_freq", "diff"])
    for row in rows:
        writer.writerow([row.hyperparameter, row.most_selected,
                         f"{row.selection_freq:.2f}",
                         f"{row.baseline_freq:.2f}", f"{row.diff:.2f}"])
    return EXIT_OK


def cmd_space(args):
    space = default_space(args.variant, args.registry or None)
    print(json.dumps({
        "variant": space.variant,
        "registry_size": len(space.classifier_registry),
        "size": search_space_size(space),
    }, indent=2))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="autopu",
        description="Auto-ML search over two-step PU learning pipelines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_csv_args(p):
        p.add_argument("csv", help="CSV file with a header row")
        p.add_argument("--label-column", required=True)
        p.add_argument("--missing-policy", choices=["error", "impute-mean"],
                       default="error")

    p = sub.add_parser("ingest", help="validate a CSV dataset and report its shape")
    add_csv_args(p)
    p.set_defaults(func=cmd_ingest, error_exit=EXIT_INGESTION)

    p = sub.add_parser("engineer", help="hide a fraction of positives to build a PU dataset")
    add_csv_args(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_engineer, error_exit=EXIT_INGESTION)

    p = sub.add_parser("run", help="run an experiment spec under nested CV")
    p.add_argument("spec", help="JSON experiment spec file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--deterministic-order", action="store_true")
    p.set_defaults(func=cmd_run, error_exit=EXIT_RUNTIME)

    p = sub.add_parser("compare", help="pairwise statistical comparison of result files")
    p.add_argument("results", nargs="+")
    p.add_argument("--metric", choices=["f_measure", "precision", "recall"],
                   default="f_measure")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_compare, error_exit=EXIT_RUNTIME)

    p = sub.add_parser("freq", help="hyperparameter selection-frequency report")
    p.add_argument("results", nargs="+")
    p.add_argument("--variant", choices=["base", "extended"], default="base")
    p.add_argument("--registry", nargs="*", default=None)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_freq, error_exit=EXIT_RUNTIME)

    p = sub.add_parser("space", help="print search-space size")
    p.add_argument("--variant", choices=["base", "extended"], default="base")
    p.add_argument("--registry", nargs="*", default=None)
    p.set_defaults(func=cmd_space, error_exit=EXIT_VALIDATION)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except experiment.IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    except (experiment.SpecError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - unexpected runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
