"""The three pipeline optimisers: genetic algorithm, surrogate-guided random
search (BO), and the evolutionary-Bayesian hybrid (EBO), plus the genetic
operators, config feature-encoding and budget accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import classifiers
from .core_types import (
    ALL_FIELDS,
    BASE_FIELDS,
    CandidateConfig,
    SearchSpace,
    random_config,
)

NUMERIC_BASE = ("iteration_count_1a", "threshold_1a", "threshold_1b")
CATEGORICAL = ("classifier_1a", "classifier_1b", "classifier_2")


@dataclass(frozen=True)
class GAParams:
    population_size: int = 101
    generations: int = 50
    crossover_prob: float = 0.9
    gene_crossover_prob: float = 0.5
    mutation_prob: float = 0.1
    tournament_size: int = 2

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        for p in (self.crossover_prob, self.gene_crossover_prob, self.mutation_prob):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must be in [0, 1]")


@dataclass(frozen=True)
class BOParams:
    it_count: int = 50
    n_configs: int = 101
    surrogate_trees: int = 100
    surrogate_min_leaf: int = 2

    def __post_init__(self):
        if self.it_count < 0:
            raise ValueError("it_count must be >= 0")
        if self.n_configs < 2:
            raise ValueError("n_configs must be >= 2")


@dataclass(frozen=True)
class EBOParams(GAParams):
    it_count: int = 50
    n_configs: int = 101
    k: int = 10
    surrogate_trees: int = 100
    surrogate_min_leaf: int = 2

    def __post_init__(self):
        super().__post_init__()
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.k + 1 > self.n_configs:
            raise ValueError("k + 1 must not exceed n_configs")


@dataclass(frozen=True)
class EvaluatedConfig:
    config: CandidateConfig
    score: float
    iteration: int  # optimiser iteration that produced it; -1 = initial pool


@dataclass
class IterationRecord:
    iteration: int
    evaluated: List[dict] = field(default_factory=list)
    best_so_far: float = 0.0


@dataclass
class SearchTrace:
    records: List[IterationRecord] = field(default_factory=list)
    n_evaluations: int = 0
    cache_hits: int = 0

    def payload(self):
        return {
            "n_evaluations": self.n_evaluations,
            "cache_hits": self.cache_hits,
            "iterations": [
                {"iteration": r.iteration, "evaluated": r.evaluated,
                 "best_so_far": r.best_so_far}
                for r in self.records
            ],
        }


def encoding_length(space: SearchSpace) -> int:
    base = 3 + 1 + 3 * len(space.classifier_registry)
    return base + 3 if space.is_extended else base


def encode_config(config: CandidateConfig, space: SearchSpace) -> np.ndarray:
    """Numeric genes copied as reals, booleans as 0/1, classifiers expanded
    into registry-ordered one-hot blocks."""
    registry = space.classifier_registry
    parts = [float(config.get(f)) for f in NUMERIC_BASE]
    parts.append(1.0 if config.flag_1b else 0.0)
    for f in CATEGORICAL:
        key = config.get(f)
        if key not in registry:
            raise ValueError(f"{f}: classifier key {key!r} not in registry")
        block = [0.0] * len(registry)
        block[registry.index(key)] = 1.0
        parts.extend(block)
    if space.is_extended:
        parts.append(float(config.spy_rate))
        parts.append(float(config.spy_tolerance))
        parts.append(1.0 if config.spy_flag else 0.0)
    return np.asarray(parts, dtype=float)


def decode_categorical(encoded, space: SearchSpace):
    """Recover the classifier keys from the one-hot blocks (round-trip check)."""
    registry = space.classifier_registry
    n = len(registry)
    keys = {}
    for i, f in enumerate(CATEGORICAL):
        block = encoded[4 + i * n: 4 + (i + 1) * n]
        keys[f] = registry[int(np.argmax(block))]
    return keys


def uniform_crossover(a, b, params, rng):
    """With probability crossover_prob, each gene independently swaps between
    the two children with probability gene_crossover_prob."""
    if rng.random() >= params.crossover_prob:
        return a, b
    child_a, child_b = a, b
    for f in ALL_FIELDS:
        if rng.random() < params.gene_crossover_prob:
            va, vb = child_a.get(f), child_b.get(f)
            child_a = child_a.with_value(f, vb)
            child_b = child_b.with_value(f, va)
    return child_a, child_b


def mutate(config, space, params, rng):
    """Each gene independently resampled from its candidate list with
    probability mutation_prob (the redraw may repeat the old value)."""
    out = config
    for f in space.gene_fields():
        if rng.random() < params.mutation_prob:
            cands = space.candidates(f)
            out = out.with_value(f, cands[int(rng.integers(len(cands)))])
    return out


def tournament_select(pool, score_of, tournament_size, rng):
    """Best of ``tournament_size`` entrants sampled uniformly with
    replacement; ties go to the earliest pool index."""
    if not pool:
        raise ValueError("empty selection pool")
    entrants = rng.integers(len(pool), size=tournament_size)
    best = min(entrants, key=lambda i: (-score_of(pool[i]), i))
    return pool[int(best)]


class _Memoiser:
    """Objective wrapper: caches by full config value, counts evaluations
    and cache hits, maps objective exceptions to score 0."""

    def __init__(self, objective_fn, trace):
        self.objective_fn = objective_fn
        self.trace = trace
        self.cache = {}

    def __contains__(self, config):
        return config.key() in self.cache

    def __call__(self, config):
        key = config.key()
        if key in self.cache:
            self.trace.cache_hits += 1
            return self.cache[key]
        try:
            score = float(self.objective_fn(config))
        except Exception:
            score = 0.0
        self.cache[key] = score
        self.trace.n_evaluations += 1
        return score


def _distinct_random_configs(space, n, rng, memo=None):
    """n random configs, distinct where the space allows it; falls back to
    accepting duplicates after a bounded number of attempts."""
    seen = set()
    out = []
    attempts = 0
    while len(out) < n and attempts < 200 * n:
        cfg = random_config(space, rng)
        attempts += 1
        if cfg.key() in seen or (memo is not None and cfg in memo):
            continue
        seen.add(cfg.key())
        out.append(cfg)
    while len(out) < n:  # space smaller than n: duplicates unavoidable
        out.append(random_config(space, rng))
    return out


def _pair_and_vary(selected, space, params, rng):
    """Shuffle, pair sequentially, crossover then mutate; odd leftover
    passes through crossover unchanged but is still mutated."""
    order = rng.permutation(len(selected))
    shuffled = [selected[i] for i in order]
    children = []
    for i in range(0, len(shuffled) - 1, 2):
        a, b = uniform_crossover(shuffled[i], shuffled[i + 1], params, rng)
        children.extend([a, b])
    if len(shuffled) % 2:
        children.append(shuffled[-1])
    return [mutate(c, space, params, rng) for c in children]


def run_ga(space, objective_fn, params: GAParams, seed):
    """Elitist generational GA with memoised fitness."""
    rng = np.random.default_rng(seed)
    trace = SearchTrace()
    memo = _Memoiser(objective_fn, trace)

    population = _distinct_random_configs(space, params.population_size, rng)
    best = None
    for gen in range(params.generations + 1):
        evaluated = [EvaluatedConfig(c, memo(c), gen - 1) for c in population]
        gen_best = max(evaluated, key=lambda e: e.score)
        if best is None or gen_best.score > best.score:
            best = gen_best
        trace.records.append(IterationRecord(
            iteration=gen - 1,
            evaluated=[{"config": e.config.to_record(), "score": e.score}
                       for e in evaluated],
            best_so_far=best.score,
        ))
        if gen == params.generations:
            break
        elite = max(evaluated, key=lambda e: e.score).config
        selected = [
            tournament_select(evaluated, lambda e: e.score,
                              params.tournament_size, rng).config
            for _ in range(params.population_size - 1)
        ]
        population = _pair_and_vary(selected, space, params, rng) + [elite]
    return best, trace


def _fit_surrogate(evaluated, space, params, seed):
    X = np.vstack([encode_config(e.config, space) for e in evaluated])
    y = np.array([e.score for e in evaluated])
    return classifiers.fit_regressor(
        X, y, seed,
        n_trees=params.surrogate_trees,
        max_features=1 / 3,
        min_samples_leaf=params.surrogate_min_leaf,
    )


def run_bo(space, objective_fn, params: BOParams, seed):
    """Surrogate-guided search: per iteration a fresh random pool is scored
    by the surrogate and only its argmax is evaluated by the objective.

    A pool argmax that was already evaluated reuses its cached score and the
    next-best unevaluated pool member is evaluated instead, keeping the
    total objective-evaluation budget at n_configs + it_count.
    """
    rng = np.random.default_rng(seed)
    trace = SearchTrace()
    memo = _Memoiser(objective_fn, trace)

    configs = _distinct_random_configs(space, params.n_configs, rng)
    evaluated = [EvaluatedConfig(c, memo(c), -1) for c in configs]
    best = max(evaluated, key=lambda e: e.score)
    trace.records.append(IterationRecord(
        iteration=-1,
        evaluated=[{"config": e.config.to_record(), "score": e.score}
                   for e in evaluated],
        best_so_far=best.score,
    ))

    surrogate_seed = int(rng.integers(2**31 - 1))
    for it in range(params.it_count):
        surrogate = _fit_surrogate(evaluated, space, params, surrogate_seed)
        pool = _distinct_random_configs(space, params.n_configs, rng, memo=memo)
        preds = surrogate.predict(
            np.vstack([encode_config(c, space) for c in pool])
        )
        order = np.argsort(-preds, kind="stable")
        chosen = None
        for idx in order:
            if pool[idx] not in memo:
                chosen = pool[idx]
                break
        if chosen is None:  # tiny space fully explored
            chosen = pool[int(order[0])]
        score = memo(chosen)
        evaluated.append(EvaluatedConfig(chosen, score, it))
        if score > best.score:
            best = max(evaluated, key=lambda e: e.score)
        trace.records.append(IterationRecord(
            iteration=it,
            evaluated=[{"config": chosen.to_record(), "score": score}],
            best_so_far=best.score,
        ))
    return best, trace


def run_ebo(space, objective_fn, params: EBOParams, seed):
    """Evolutionary-Bayesian hybrid: offspring of the whole evaluated pool
    are surrogate-scored; the surrogate argmax plus k tournament-selected,
    re-varied offspring are evaluated per iteration (k + 1 evaluations)."""
    rng = np.random.default_rng(seed)
    trace = SearchTrace()
    memo = _Memoiser(objective_fn, trace)

    configs = _distinct_random_configs(space, params.n_configs, rng)
    evaluated = [EvaluatedConfig(c, memo(c), -1) for c in configs]
    best = max(evaluated, key=lambda e: e.score)
    trace.records.append(IterationRecord(
        iteration=-1,
        evaluated=[{"config": e.config.to_record(), "score": e.score}
                   for e in evaluated],
        best_so_far=best.score,
    ))

    surrogate_seed = int(rng.integers(2**31 - 1))
    for it in range(params.it_count):
        surrogate = _fit_surrogate(evaluated, space, params, surrogate_seed)
        offspring = _pair_and_vary([e.config for e in evaluated], space,
                                   params, rng)
        preds = surrogate.predict(
            np.vstack([encode_config(c, space) for c in offspring])
        )
        scored = list(zip(offspring, preds))
        order = np.argsort(-preds, kind="stable")

        to_evaluate = []

        def take_unevaluated(start_rank=0):
            for idx in order[start_rank:]:
                cand = offspring[int(idx)]
                if cand not in memo and all(
                    cand.key() != c.key() for c in to_evaluate
                ):
                    return cand
            return None

        best_cand = take_unevaluated()
        if best_cand is None:
            best_cand = offspring[int(order[0])]
        to_evaluate.append(best_cand)

        k_pop = [
            tournament_select(scored, lambda sc: sc[1],
                              params.tournament_size, rng)[0]
            for _ in range(params.k)
        ]
        k_pop = _pair_and_vary(k_pop, space, params, rng)
        for cand in k_pop:
            if cand in memo or any(cand.key() == c.key() for c in to_evaluate):
                replacement = take_unevaluated()
                if replacement is None:
                    replacement = _distinct_random_configs(
                        space, 1, rng, memo=memo)[0]
                cand = replacement
            to_evaluate.append(cand)

        records = []
        for cand in to_evaluate:
            score = memo(cand)
            evaluated.append(EvaluatedConfig(cand, score, it))
            records.append({"config": cand.to_record(), "score": score})
        best = max(evaluated, key=lambda e: e.score)
        trace.records.append(IterationRecord(
            iteration=it, evaluated=records, best_so_far=best.score
        ))
    return best, trace
