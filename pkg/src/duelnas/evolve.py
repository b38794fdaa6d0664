"""Evolutionary engine driven by the learned dominance comparator.

True objective values are touched only twice: once up front, to evaluate
the small sample the comparator ensemble is trained on, and once at the
very end, to score the final population.  Everything in between (mating
selection, front sorting, survivor selection) runs on ensemble votes.
Survivor selection replaces the usual crowding-distance tiebreaker with a
descending parameter-count sort of the splitting front: parameter counts
come from the table for free, and bigger models are a serviceable proxy
for accuracy, which counters the size-minimizing pull of the objectives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bench import AccuracyField, ArchRecord, CountingTable
from .pairs import sample_architectures
from .space import (
    TOTAL_BITS,
    Genotype,
    ObjectiveVector,
    OneHotBits,
    decode,
    dominates,
    encode,
    random_genotype,
    repair,
)
from .surrogate import (
    DominanceRelation,
    Ensemble,
    TrainConfig,
    ensemble_predict,
    pairwise_votes,
    train_ensemble,
)

Comparator = Callable[[object, object], DominanceRelation]


@dataclass(frozen=True)
class Individual:
    """Population member with its cached encoding and free parameter count."""

    genotype: Genotype
    bits: OneHotBits
    params_hint: float

    @classmethod
    def create(cls, genotype: Genotype, table) -> "Individual":
        return cls(genotype=genotype, bits=encode(genotype), params_hint=table.param_count(genotype))


@dataclass
class RunConfig:
    pop_size: int = 50
    generations: int = 2000
    crossover_rate: float = 0.7
    mutation_rate: float = 0.1
    ns: int = 600
    nm: int = 7
    rounds: int = 100
    seed: int = 0
    dataset: str = ""
    accuracy_field: AccuracyField = AccuracyField.TRAIN

    def __post_init__(self) -> None:
        if self.pop_size < 2 or self.pop_size % 2 != 0:
            raise ValueError("pop_size must be even and >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.nm < 1 or self.nm % 2 == 0:
            raise ValueError("nm must be odd and >= 1")
        if self.ns < 1:
            raise ValueError("ns must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass
class FrontPartition:
    """Disjoint fronts, best first; their union is the sorted population."""

    fronts: list[list]

    def __len__(self) -> int:
        return len(self.fronts)

    def __iter__(self):
        return iter(self.fronts)

    def __getitem__(self, i: int):
        return self.fronts[i]


@dataclass(frozen=True)
class FrontEntry:
    """One member of the final true-objective non-dominated set."""

    genotype: Genotype
    objectives: ObjectiveVector
    record: ArchRecord


@dataclass
class SearchResult:
    final_population: list[Individual]
    front: list[FrontEntry]
    true_evaluations: int
    front_size_log: list[list[int]] = field(default_factory=list)


def true_comparator(a: ObjectiveVector, b: ObjectiveVector) -> DominanceRelation:
    """Ground-truth three-way dominance; the reference comparator for sorting."""
    if dominates(a, b):
        return DominanceRelation.FIRST_DOMINATES
    if dominates(b, a):
        return DominanceRelation.SECOND_DOMINATES
    return DominanceRelation.INCOMPARABLE


def ensemble_comparator(ensemble: Ensemble) -> Comparator:
    def cmp(a: Individual, b: Individual) -> DominanceRelation:
        return ensemble_predict(ensemble, a.bits, b.bits)

    return cmp


# --- variation operators -----------------------------------------------------


def uniform_crossover(a, b, rate: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """With probability ``rate``, swap each bit position between the two
    children with probability one half; otherwise copy the parents.
    Outputs are raw 30-bit vectors and may need repair."""
    av = _raw_bits(a)
    bv = _raw_bits(b)
    if rng.random() < rate:
        mask = rng.random(TOTAL_BITS) < 0.5
        return np.where(mask, bv, av), np.where(mask, av, bv)
    return av.copy(), bv.copy()


def flip_mutation(v, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each bit independently with probability ``rate``."""
    raw = _raw_bits(v)
    flips = rng.random(TOTAL_BITS) < rate
    return np.where(flips, 1 - raw, raw)


def _raw_bits(v) -> np.ndarray:
    if isinstance(v, OneHotBits):
        return np.array(v.bits, dtype=np.uint8)
    arr = np.asarray(v)
    return (arr != 0).astype(np.uint8)


# --- selection ----------------------------------------------------------------


def tournament_select(
    population: Sequence[Individual],
    ensemble: Ensemble | None,
    rng: np.random.Generator,
    comparator: Comparator | None = None,
) -> list[Individual]:
    """Binary tournaments until the mating pool matches the population size.

    Contestants are two distinct slots drawn uniformly; the comparator's
    dominator wins, and incomparable verdicts fall back to a fair coin.
    """
    if comparator is None:
        if ensemble is None:
            raise ValueError("need an ensemble or an explicit comparator")
        comparator = ensemble_comparator(ensemble)
    n = len(population)
    pool = []
    for _ in range(n):
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
        rel = comparator(population[i], population[j])
        if rel is DominanceRelation.FIRST_DOMINATES:
            win = i
        elif rel is DominanceRelation.SECOND_DOMINATES:
            win = j
        else:
            win = i if rng.random() < 0.5 else j
        pool.append(population[win])
    return pool


def non_dominated_sort(items: Sequence, comparator: Comparator) -> FrontPartition:
    """Partition into dominance fronts using only pairwise comparator calls.

    Each unordered pair is compared exactly once, lower index first, and
    the three-way verdict becomes at most one edge of a dominance digraph.
    Fronts are then peeled off: a front is everything no remaining item
    dominates.  For a transitive comparator this is exactly the classical
    non-dominated partition regardless of item order; a learned comparator
    can produce cycles, in which case the lowest-index remaining item opens
    the next front so the peel always terminates deterministically.
    """
    n = len(items)
    if n == 0:
        raise ValueError("cannot sort an empty population")
    dom = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            rel = comparator(items[i], items[j])
            if rel is DominanceRelation.FIRST_DOMINATES:
                dom[i, j] = True
            elif rel is DominanceRelation.SECOND_DOMINATES:
                dom[j, i] = True
    return FrontPartition([[items[i] for i in front] for front in _peel_fronts(dom)])


def _peel_fronts(dom: np.ndarray) -> list[list[int]]:
    n = dom.shape[0]
    remaining = np.arange(n)
    fronts = []
    while remaining.size:
        sub = dom[np.ix_(remaining, remaining)]
        undominated = ~sub.any(axis=0)
        if not undominated.any():
            undominated[0] = True  # comparator cycle; lowest index breaks it
        fronts.append([int(i) for i in remaining[undominated]])
        remaining = remaining[~undominated]
    return fronts


def _ensemble_majority(ensemble: Ensemble, individuals: Sequence[Individual]) -> np.ndarray:
    """maj[i, j]: does a strict block majority say slot i dominates slot j?

    Computed once per unique bit pattern and broadcast back to slots;
    identical patterns never dominate each other.
    """
    uniq: dict[bytes, int] = {}
    rows = []
    slots = []
    for ind in individuals:
        key = ind.bits.packed()
        if key not in uniq:
            uniq[key] = len(rows)
            rows.append(ind.bits.as_array())
        slots.append(uniq[key])
    votes = pairwise_votes(ensemble, np.stack(rows))
    maj = votes * 2 > ensemble.size
    np.fill_diagonal(maj, False)
    return maj[np.ix_(slots, slots)]


def _dominance_from_majority(maj: np.ndarray) -> np.ndarray:
    """Two-stage protocol over all pairs, lower index asked first."""
    upper = np.triu(np.ones_like(maj, dtype=bool), k=1)
    return (maj & upper) | (maj & ~maj.T & upper.T)


def _majority_comparator(individuals: Sequence[Individual], maj: np.ndarray) -> Comparator:
    index = {id(ind): i for i, ind in enumerate(individuals)}

    def cmp(a: Individual, b: Individual) -> DominanceRelation:
        i, j = index[id(a)], index[id(b)]
        if maj[i, j]:
            return DominanceRelation.FIRST_DOMINATES
        if maj[j, i]:
            return DominanceRelation.SECOND_DOMINATES
        return DominanceRelation.INCOMPARABLE

    return cmp


def biased_selection(
    n: int,
    ensemble: Ensemble | None,
    parents: Sequence[Individual],
    offspring: Sequence[Individual],
    param_of: Callable[[Individual], float] | None = None,
    comparator: Comparator | None = None,
) -> list[Individual]:
    """Survivor selection: whole fronts while they fit, then the splitting
    front truncated in descending parameter-count order.

    The parent/offspring merge is a set union by genotype (parents first).
    Keeping duplicate copies instead is fatal: copies are mutually
    incomparable, so copies of the largest front member can never be
    truncated, and the population provably fixates on a single genotype.
    """
    survivors, _sizes = _biased_selection_logged(n, ensemble, parents, offspring, param_of, comparator)
    return survivors


def _biased_selection_logged(
    n: int,
    ensemble: Ensemble | None,
    parents: Sequence[Individual],
    offspring: Sequence[Individual],
    param_of: Callable[[Individual], float] | None = None,
    comparator: Comparator | None = None,
) -> tuple[list[Individual], list[int]]:
    merged: list[Individual] = []
    seen: set[tuple[int, ...]] = set()
    for ind in list(parents) + list(offspring):
        if ind.genotype.ops not in seen:
            seen.add(ind.genotype.ops)
            merged.append(ind)
    if param_of is None:
        param_of = lambda ind: ind.params_hint  # noqa: E731
    if comparator is not None:
        partition = non_dominated_sort(merged, comparator)
    else:
        if ensemble is None:
            raise ValueError("need an ensemble or an explicit comparator")
        dom = _dominance_from_majority(_ensemble_majority(ensemble, merged))
        partition = FrontPartition([[merged[i] for i in front] for front in _peel_fronts(dom)])

    survivors: list[Individual] = []
    sizes = [len(f) for f in partition]
    for front in partition:
        if len(survivors) + len(front) <= n:
            survivors.extend(front)
            if len(survivors) == n:
                break
        else:
            ranked = sorted(front, key=param_of, reverse=True)  # stable: ties keep front order
            survivors.extend(ranked[: n - len(survivors)])
            break
    while len(survivors) < n:  # fewer than n distinct genotypes exist; cycle them
        survivors.extend(survivors[: n - len(survivors)])
    return survivors, sizes


# --- the three-phase driver ----------------------------------------------------


def run_search(
    cfg: RunConfig,
    table,
    pretrained: Ensemble | None = None,
    hyper: TrainConfig | None = None,
) -> SearchResult:
    """Full search: train the comparator (unless one is handed in), evolve on
    votes only, then score the final population against the table."""
    counting = table if isinstance(table, CountingTable) else CountingTable(table)
    root = np.random.default_rng(cfg.seed)
    model_rng, evo_rng = root.spawn(2)

    if pretrained is None:
        ds = sample_architectures(counting, cfg.ns, cfg.accuracy_field, model_rng)
        ensemble = train_ensemble(ds, cfg.nm, hyper, cfg.rounds, model_rng)
    else:
        ensemble = pretrained

    population = [Individual.create(random_genotype(evo_rng), counting) for _ in range(cfg.pop_size)]
    front_size_log: list[list[int]] = []

    for _ in range(cfg.generations):
        maj = _ensemble_majority(ensemble, population)
        pool = tournament_select(
            population, ensemble, evo_rng, comparator=_majority_comparator(population, maj)
        )
        offspring = []
        for k in range(0, cfg.pop_size, 2):
            raws = uniform_crossover(pool[k].bits, pool[k + 1].bits, cfg.crossover_rate, evo_rng)
            for raw in raws:
                mutated = flip_mutation(raw, cfg.mutation_rate, evo_rng)
                genotype = decode(repair(mutated, evo_rng))
                offspring.append(Individual.create(genotype, counting))
        population, sizes = _biased_selection_logged(cfg.pop_size, ensemble, population, offspring)
        front_size_log.append(sizes)

    front = extract_final_front(population, counting, cfg.accuracy_field)
    return SearchResult(
        final_population=population,
        front=front,
        true_evaluations=counting.true_evaluations,
        front_size_log=front_size_log,
    )


def extract_final_front(
    population: Sequence[Individual],
    table,
    which: AccuracyField,
) -> list[FrontEntry]:
    """True-objective non-dominated subset of a population, deduplicated.

    Every distinct genotype in the population is evaluated once; these are
    the only true evaluations after the initial training sample.
    """
    seen: dict[tuple[int, ...], Genotype] = {}
    for ind in population:
        seen.setdefault(ind.genotype.ops, ind.genotype)
    genotypes = list(seen.values())
    objectives = [table.objectives(g, which) for g in genotypes]
    entries = []
    for i, g in enumerate(genotypes):
        if not any(dominates(objectives[j], objectives[i]) for j in range(len(genotypes)) if j != i):
            entries.append(FrontEntry(genotype=g, objectives=objectives[i], record=table.record(g)))
    return entries
