"""Elitist nondominated genetic search over the 40-integer encoding.

Both objectives are minimized.  Parent selection is binary tournament
on (rank, crowding); variation is two-point crossover on the flat
vector plus per-gene polynomial mutation on a continuous relaxation,
rounded and clamped back to the positional range.  Survivors of the
combined parent+offspring pool are taken front by front, the last
partial front by descending crowding distance with insertion-order
tie-breaking.

Objective evaluation is cached on genome content, so duplicate
candidates never trigger a second evaluation; with a deterministic
objective the search trajectory depends only on the seed, not on the
number of evaluation threads.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInput, SearchInterrupted
from .rwe import EvalConfig, evaluate
from .search_space import GENOME_LENGTH, Genome, flatten, gene_bounds, parse, random_genome

Objectives = tuple[float, float]


@dataclass(frozen=True)
class SearchConfig:
    pop_size: int = 20
    generations: int = 30
    crossover_prob: float = 0.9
    gene_mutation_prob: float = 1.0 / GENOME_LENGTH
    eta_m: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 2 or self.pop_size % 2:
            raise DegenerateInput("pop_size must be even and >= 2")
        if self.generations < 0:
            raise DegenerateInput("generations must be >= 0")
        for name in ("crossover_prob", "gene_mutation_prob"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise DegenerateInput(f"{name} must lie in [0, 1]")
        if self.eta_m < 0:
            raise DegenerateInput("eta_m must be non-negative")
        if self.seed < 0:
            raise DegenerateInput("seed must be non-negative")


@dataclass
class Individual:
    genome: Genome
    objectives: Objectives | None = None
    rank: int | None = None
    crowding: float | None = None


def dominates(a: Objectives, b: Objectives) -> bool:
    """True iff a is no worse in every objective and better in at least one."""
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def fast_nondominated_sort(objectives: Sequence[Objectives]) -> list[list[int]]:
    """Indices grouped into fronts, best first, via domination bookkeeping."""
    n = len(objectives)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(objectives[i], objectives[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(objectives[j], objectives[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    for i in range(n):
        if domination_count[i] == 0:
            fronts[0].append(i)
    current = 0
    while fronts[current]:
        nxt: list[int] = []
        for i in fronts[current]:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current += 1
        fronts.append(nxt)
    return fronts[:-1]


def crowding_distance(front: Sequence[Objectives]) -> list[float]:
    """Per-member crowding distance within one front.

    Boundary members of each objective get +inf; an objective with zero
    range contributes nothing to interior members.
    """
    m = len(front)
    if m <= 2:
        return [math.inf] * m
    dist = [0.0] * m
    for obj in range(2):
        order = sorted(range(m), key=lambda i: front[i][obj])
        dist[order[0]] = dist[order[-1]] = math.inf
        lo, hi = front[order[0]][obj], front[order[-1]][obj]
        if hi == lo:
            continue
        inv_range = 1.0 / (hi - lo)
        for pos in range(1, m - 1):
            i = order[pos]
            if dist[i] != math.inf:
                dist[i] += (front[order[pos + 1]][obj] - front[order[pos - 1]][obj]) * inv_range
    return dist


def tournament_select(population: Sequence[Individual], rng: np.random.Generator) -> Individual:
    """Binary tournament: lower rank wins, then larger crowding, then coin flip."""
    i, j = rng.choice(len(population), size=2, replace=False)
    a, b = population[i], population[j]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def two_point_crossover(
    g1: Genome, g2: Genome, rng: np.random.Generator, prob: float = 0.9
) -> tuple[Genome, Genome]:
    """Swap one contiguous span of the flat vectors (with probability prob)."""
    if rng.random() >= prob:
        return g1, g2
    v1, v2 = flatten(g1), flatten(g2)
    cut_a, cut_b = sorted(rng.choice(GENOME_LENGTH + 1, size=2, replace=False).tolist())
    v1[cut_a:cut_b], v2[cut_a:cut_b] = v2[cut_a:cut_b], v1[cut_a:cut_b]
    return parse(v1), parse(v2)


def polynomial_mutation(
    genome: Genome,
    rng: np.random.Generator,
    eta_m: float = 20.0,
    gene_prob: float = 1.0 / GENOME_LENGTH,
) -> Genome:
    """Per-gene polynomial mutation on [0, bound], rounded and clamped.

    Uses the boundary-aware perturbation with distribution index eta_m;
    positions with bound 0 have nothing to mutate and are skipped.
    """
    values = flatten(genome)
    bounds = gene_bounds()
    exponent = 1.0 / (eta_m + 1.0)
    for pos in range(GENOME_LENGTH):
        if rng.random() >= gene_prob:
            continue
        hi = bounds[pos]
        if hi == 0:
            continue
        x = float(values[pos])
        delta_lo = x / hi
        delta_hi = (hi - x) / hi
        u = rng.random()
        if u <= 0.5:
            inner = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - delta_lo) ** (eta_m + 1.0)
            delta_q = inner**exponent - 1.0
        else:
            inner = 2.0 * (1.0 - u) + (2.0 * u - 1.0) * (1.0 - delta_hi) ** (eta_m + 1.0)
            delta_q = 1.0 - inner**exponent
        mutated = x + delta_q * hi
        values[pos] = int(min(hi, max(0, math.floor(mutated + 0.5))))
    return parse(values)


@dataclass(frozen=True)
class IndividualRecord:
    genome: tuple[int, ...]
    error: float
    flops: float
    rank: int
    crowding: float


@dataclass(frozen=True)
class GenerationSnapshot:
    generation: int
    individuals: tuple[IndividualRecord, ...]
    evaluations: int  # fresh objective evaluations performed this generation
    cache_hits: int  # candidates served from the content-keyed cache

    def front(self) -> tuple[IndividualRecord, ...]:
        return tuple(r for r in self.individuals if r.rank == 0)


@dataclass
class SearchHistory:
    snapshots: list[GenerationSnapshot] = field(default_factory=list)
    elapsed_s: float = 0.0

    def final(self) -> GenerationSnapshot:
        if not self.snapshots:
            raise DegenerateInput("history is empty")
        return self.snapshots[-1]


class _EvalCache:
    def __init__(self):
        self.results: dict[tuple[int, ...], Objectives] = {}
        self.hits = 0
        self.evaluations = 0


def _evaluate_population(
    population: list[Individual],
    objective: Callable[[Genome], Objectives],
    cache: _EvalCache,
    n_threads: int,
):
    keys = [tuple(flatten(ind.genome)) for ind in population]
    pending: dict[tuple[int, ...], Genome] = {}
    for key, ind in zip(keys, population):
        if key not in cache.results and key not in pending:
            pending[key] = ind.genome
    cache.hits += len(keys) - len(pending)
    cache.evaluations += len(pending)
    if pending:
        items = list(pending.items())
        if n_threads > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                outcomes = list(pool.map(lambda kv: objective(kv[1]), items))
        else:
            outcomes = [objective(genome) for _, genome in items]
        for (key, _), objs in zip(items, outcomes):
            cache.results[key] = objs
    for key, ind in zip(keys, population):
        ind.objectives = cache.results[key]


def _sort_and_rank(population: list[Individual]):
    objs = [ind.objectives for ind in population]
    for rank, front in enumerate(fast_nondominated_sort(objs)):
        dists = crowding_distance([objs[i] for i in front])
        for i, dist in zip(front, dists):
            population[i].rank = rank
            population[i].crowding = dist


def _environmental_selection(pool: list[Individual], size: int) -> list[Individual]:
    objs = [ind.objectives for ind in pool]
    survivors: list[Individual] = []
    for rank, front in enumerate(fast_nondominated_sort(objs)):
        dists = crowding_distance([objs[i] for i in front])
        for i, dist in zip(front, dists):
            pool[i].rank = rank
            pool[i].crowding = dist
        if len(survivors) + len(front) <= size:
            survivors.extend(pool[i] for i in front)
            if len(survivors) == size:
                break
        else:
            # stable sort keeps insertion order among equal distances
            order = sorted(range(len(front)), key=lambda p: -dists[p])
            survivors.extend(pool[front[p]] for p in order[: size - len(survivors)])
            break
    return survivors


def _snapshot(
    generation: int, population: list[Individual], counted: tuple[int, int]
) -> GenerationSnapshot:
    records = tuple(
        IndividualRecord(
            genome=tuple(flatten(ind.genome)),
            error=float(ind.objectives[0]),
            flops=ind.objectives[1],
            rank=int(ind.rank),
            crowding=float(ind.crowding),
        )
        for ind in population
    )
    evals, hits = counted
    return GenerationSnapshot(
        generation=generation, individuals=records, evaluations=evals, cache_hits=hits
    )


def nsga2_search(
    config: SearchConfig,
    objective: Callable[[Genome], Objectives],
    n_threads: int = 1,
    on_generation: Callable[[GenerationSnapshot], None] | None = None,
) -> SearchHistory:
    """Run the search against an arbitrary bi-objective function.

    Returns one snapshot per generation, including the initial
    population (generations + 1 snapshots total).  KeyboardInterrupt is
    converted to SearchInterrupted carrying the completed snapshots.
    """
    rng = np.random.default_rng(config.seed)
    history = SearchHistory()
    t0 = time.perf_counter()
    cache = _EvalCache()

    def counted_eval(pop: list[Individual]) -> tuple[int, int]:
        before = (cache.evaluations, cache.hits)
        _evaluate_population(pop, objective, cache, n_threads)
        return cache.evaluations - before[0], cache.hits - before[1]

    try:
        population = [Individual(random_genome(rng)) for _ in range(config.pop_size)]
        counts = counted_eval(population)
        _sort_and_rank(population)
        snap = _snapshot(0, population, counts)
        history.snapshots.append(snap)
        if on_generation:
            on_generation(snap)
        for generation in range(1, config.generations + 1):
            offspring: list[Individual] = []
            while len(offspring) < config.pop_size:
                parent_a = tournament_select(population, rng)
                parent_b = tournament_select(population, rng)
                child_a, child_b = two_point_crossover(
                    parent_a.genome, parent_b.genome, rng, config.crossover_prob
                )
                for child in (child_a, child_b):
                    mutated = polynomial_mutation(
                        child, rng, config.eta_m, config.gene_mutation_prob
                    )
                    offspring.append(Individual(mutated))
            offspring = offspring[: config.pop_size]
            counts = counted_eval(offspring)
            population = _environmental_selection(population + offspring, config.pop_size)
            snap = _snapshot(generation, population, counts)
            history.snapshots.append(snap)
            if on_generation:
                on_generation(snap)
    except KeyboardInterrupt:
        history.elapsed_s = time.perf_counter() - t0
        raise SearchInterrupted(history)
    history.elapsed_s = time.perf_counter() - t0
    return history


def run_search(
    search_config: SearchConfig,
    eval_config: EvalConfig,
    datasets,
    n_threads: int = 1,
    on_generation: Callable[[GenerationSnapshot], None] | None = None,
) -> SearchHistory:
    """Search with the training-free evaluator as the objective."""

    def objective(genome: Genome) -> Objectives:
        result = evaluate(genome, datasets, eval_config)
        return (result.error, result.flops)

    return nsga2_search(search_config, objective, n_threads, on_generation)


def history_to_dict(history: SearchHistory, config: dict, version: str) -> dict:
    """JSON-ready view of a search run.

    Wall-clock timing is deliberately excluded so identical runs render
    identical bytes; non-finite crowding distances map to null.
    """
    return {
        "version": version,
        "config": config,
        "generations": [
            {
                "generation": s.generation,
                "evaluations": s.evaluations,
                "cache_hits": s.cache_hits,
                "individuals": [
                    {
                        "genome": list(r.genome),
                        "error": r.error,
                        "flops": r.flops,
                        "rank": r.rank,
                        "crowding": None if math.isinf(r.crowding) else r.crowding,
                    }
                    for r in s.individuals
                ],
            }
            for s in history.snapshots
        ],
    }
