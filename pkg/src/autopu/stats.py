"""Statistical comparison of result files: Wilcoxon signed-rank tests with
Holm correction, average ranks, Pearson correlation, and hyperparameter
selection-frequency reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .core_types import ALL_FIELDS, SearchSpace

EXACT_WILCOXON_LIMIT = 12


@dataclass(frozen=True)
class PairedSample:
    values_a: np.ndarray
    values_b: np.ndarray
    ids: Tuple[str, ...]

    def __post_init__(self):
        a = np.asarray(self.values_a, dtype=float)
        b = np.asarray(self.values_b, dtype=float)
        object.__setattr__(self, "values_a", a)
        object.__setattr__(self, "values_b", b)
        if len(a) != len(b) or len(a) != len(self.ids):
            raise ValueError("paired sample lengths must match")


@dataclass
class WilcoxonResult:
    p_value: float
    statistic: float
    n_nonzero: int
    method: str  # "exact" | "approx" | "degenerate"

    @property
    def degenerate(self):
        return self.method == "degenerate"


def _signed_ranks(differences):
    """Drop zero differences, mean-rank ties on |d|; ranks doubled so tied
    mean ranks stay integral for the exact enumeration."""
    d = np.asarray(differences, dtype=float)
    d = d[d != 0]
    if len(d) == 0:
        return d, np.array([], dtype=int)
    absd = np.abs(d)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(len(d))
    sorted_abs = absd[order]
    i = 0
    while i < len(d):
        j = i
        while j + 1 < len(d) and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1  # mean rank, 1-based
        i = j + 1
    return d, np.round(ranks * 2).astype(int)


def _exact_two_sided_p(signs, ranks2):
    """Exact p by dynamic programming over the doubled-rank sum null
    distribution (equivalent to enumerating all sign assignments)."""
    total = int(np.sum(ranks2))
    # counts[w] = number of sign assignments with doubled W+ equal to w
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    w_plus = int(np.sum(ranks2[signs > 0]))
    n_assignments = counts.sum()
    cdf = counts[: w_plus + 1].sum() / n_assignments
    sf = counts[w_plus:].sum() / n_assignments
    return min(1.0, 2 * min(cdf, sf))


def _approx_two_sided_p(signs, ranks2):
    """Normal approximation with tie correction and continuity correction."""
    ranks = ranks2 / 2
    n = len(ranks)
    w_plus = float(np.sum(ranks[signs > 0]))
    mu = n * (n + 1) / 4
    var = n * (n + 1) * (2 * n + 1) / 24
    _, tie_counts = np.unique(ranks2, return_counts=True)
    var -= np.sum(tie_counts**3 - tie_counts) / 48
    if var <= 0:
        return 1.0
    diff = w_plus - mu
    # continuity correction pulls the statistic toward the mean
    diff -= 0.5 * np.sign(diff)
    z = diff / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2)))


def wilcoxon(sample: PairedSample, force_method=None) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired values.

    Exact null-distribution enumeration for up to 12 non-zero differences,
    tie-corrected normal approximation with continuity correction above.
    All-zero differences give p = 1 with a degenerate flag.
    """
    d, ranks2 = _signed_ranks(sample.values_a - sample.values_b)
    if len(d) == 0:
        return WilcoxonResult(1.0, 0.0, 0, "degenerate")
    signs = np.sign(d)
    w_plus = float(np.sum(ranks2[signs > 0]) / 2)
    method = force_method
    if method is None:
        method = "exact" if len(d) <= EXACT_WILCOXON_LIMIT else "approx"
    if method == "exact":
        p = _exact_two_sided_p(signs, ranks2)
    else:
        p = _approx_two_sided_p(signs, ranks2)
    return WilcoxonResult(p, w_plus, len(d), method)


@dataclass
class HolmReport:
    """Step-down decisions; order follows the sorted (ascending) p-values."""

    p_values: List[float]
    adjusted_alphas: List[float]
    significant: List[bool]
    order: List[int]  # original index of each sorted hypothesis
    stop_index: int  # first non-significant sorted position, or n

    def decision_for(self, original_index):
        return self.significant[self.order.index(original_index)]


def holm(p_values: Sequence[float], alpha=0.05) -> HolmReport:
    """Holm step-down: the i-th smallest p-value is tested at alpha/(n-i);
    the first failure stops the procedure and all later hypotheses are
    non-significant."""
    if len(p_values) < 1:
        raise ValueError("need at least one p-value")
    for p in p_values:
        if not 0 <= p <= 1:
            raise ValueError(f"p-value out of range: {p}")
    n = len(p_values)
    order = sorted(range(n), key=lambda i: p_values[i])
    sorted_p = [p_values[i] for i in order]
    adjusted = [alpha / (n - i) for i in range(n)]
    significant = []
    stopped = False
    stop_index = n
    for i, (p, a) in enumerate(zip(sorted_p, adjusted)):
        if stopped or p >= a:
            if not stopped:
                stop_index = i
            stopped = True
            significant.append(False)
        else:
            significant.append(True)
    return HolmReport(sorted_p, adjusted, significant, order, stop_index)


def average_ranks(metric_a, metric_b):
    """Per-dataset rank 1 for the better metric value, 2 for the worse,
    1.5 each on ties; averaged over datasets."""
    a = np.asarray(metric_a, dtype=float)
    b = np.asarray(metric_b, dtype=float)
    if len(a) != len(b):
        raise ValueError("metric vectors must align")
    rank_a = np.where(a > b, 1.0, np.where(a < b, 2.0, 1.5))
    rank_b = 3.0 - rank_a
    return float(np.mean(rank_a)), float(np.mean(rank_b))


def pearson(x, y):
    """Product-moment correlation; zero variance is an error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("vectors must have equal length")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    if np.std(x) == 0 or np.std(y) == 0:
        raise ValueError("zero variance")
    return float(np.corrcoef(x, y)[0, 1])


CORRELATION_CATEGORIES = (
    (0.00, 0.10, "negligible"),
    (0.10, 0.40, "weak"),
    (0.40, 0.70, "moderate"),
    (0.70, 0.90, "strong"),
    (0.90, 1.01, "very strong"),
)


def correlation_category(r):
    """Magnitude label for a positive-correlation coefficient."""
    magnitude = abs(r)
    for lo, hi, label in CORRELATION_CATEGORIES:
        if lo <= magnitude < hi:
            return label
    return "very strong"


@dataclass
class FrequencyRow:
    hyperparameter: str
    most_selected: object
    selection_freq: float  # percent
    baseline_freq: float  # percent
    diff: float
    counts: Dict[object, int] = field(default_factory=dict)


def selection_frequency(best_configs, space: SearchSpace) -> List[FrequencyRow]:
    """Per-hyperparameter selected-value frequencies across best configs,
    against the uniform baseline 1 / |candidate list|."""
    if not best_configs:
        raise ValueError("need at least one result")
    rows = []
    n = len(best_configs)
    for f in space.gene_fields():
        counts: Dict[object, int] = {}
        for cfg in best_configs:
            value = cfg[f] if isinstance(cfg, dict) else cfg.get(f)
            counts[value] = counts.get(value, 0) + 1
        most = max(counts, key=lambda v: (counts[v], str(v)))
        baseline = 100.0 / len(space.candidates(f))
        freq = 100.0 * counts[most] / n
        rows.append(FrequencyRow(f, most, freq, baseline, freq - baseline, counts))
    return rows


@dataclass
class ComparisonRow:
    system_a: str
    system_b: str
    metric: str
    rank_a: float
    rank_b: float
    p_value: float
    adjusted_alpha: float
    significant: bool


def compare_systems(per_system_metrics: Dict[str, Dict[str, float]],
                    metric: str, alpha=0.05) -> List[ComparisonRow]:
    """All pairwise comparisons between systems over shared datasets, with a
    Holm correction applied across the pairs."""
    systems = sorted(per_system_metrics)
    if len(systems) < 2:
        raise ValueError("need at least two systems")
    shared = set.intersection(*(set(per_system_metrics[s]) for s in systems))
    for s in systems:
        missing = set(per_system_metrics[s]) ^ shared
        if missing:
            raise ValueError(f"system {s} missing datasets: {sorted(missing)}")
    datasets = sorted(shared)
    pairs = [(a, b) for i, a in enumerate(systems) for b in systems[i + 1:]]
    results = []
    p_values = []
    for a, b in pairs:
        va = np.array([per_system_metrics[a][d] for d in datasets])
        vb = np.array([per_system_metrics[b][d] for d in datasets])
        rank_a, rank_b = average_ranks(va, vb)
        res = wilcoxon(PairedSample(va, vb, tuple(datasets)))
        p_values.append(res.p_value)
        results.append((a, b, rank_a, rank_b, res.p_value))
    report = holm(p_values, alpha)
    rows = []
    for i, (a, b, rank_a, rank_b, p) in enumerate(results):
        pos = report.order.index(i)
        rows.append(ComparisonRow(a, b, metric, rank_a, rank_b, p,
                                  report.adjusted_alphas[pos],
                                  report.significant[pos]))
    return rows
