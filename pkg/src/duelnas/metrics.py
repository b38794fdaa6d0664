"""Quality measurements: comparator accuracy/F1 and search-outcome statistics.

Comparator evaluation scores the raw first-stage majority bit on ordered
pairs drawn from architectures outside the training sample, against the
true dominance label.  That mirrors deployment: no class rebalancing, the
natural label skew included.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .bench import AccuracyField, BenchmarkTable
from .space import Genotype, encode
from .surrogate import Ensemble, stage_votes


class InsufficientArchitecturesError(ValueError):
    """Not enough architectures outside the excluded set to draw pairs from."""


@dataclass(frozen=True)
class Confusion:
    """Counts with "first dominates second" (label 1) as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy_percent(self) -> float:
        return 100.0 * (self.tp + self.tn) / self.total

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2.0 * self.tp / denom if denom else 0.0


class SurrogateScore(NamedTuple):
    accuracy: float  # percent
    f1: float
    confusion: Confusion


@dataclass(frozen=True)
class RunStats:
    """Best-test-error summary across independent repeats (mean +/- population std)."""

    best_errors: tuple[float, ...]
    mean: float
    std: float

    @property
    def repeats(self) -> int:
        return len(self.best_errors)


def evaluate_surrogate(
    ensemble: Ensemble,
    table: BenchmarkTable,
    holdout_excluded: Iterable[Genotype] | Iterable[tuple[int, ...]],
    n_pairs: int,
    which: AccuracyField,
    rng: np.random.Generator,
) -> SurrogateScore:
    """Accuracy/F1 of the first-stage majority vote on random held-out pairs.

    Pairs are ordered, drawn uniformly with replacement from architectures
    not in ``holdout_excluded``.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    excluded = {g.ops if isinstance(g, Genotype) else tuple(g) for g in holdout_excluded}
    pool = [g for g in table.genotypes() if g.ops not in excluded]
    if len(pool) < 2:
        raise InsufficientArchitecturesError(
            f"only {len(pool)} architectures left outside the excluded set"
        )

    x = np.stack([encode(g).as_array() for g in pool])
    obj = np.empty((len(pool), 3))
    for i, g in enumerate(pool):
        obj[i] = table.objectives(g, which).as_tuple()

    first = rng.integers(0, len(pool), size=n_pairs)
    second = rng.integers(0, len(pool), size=n_pairs)
    a, b = obj[first], obj[second]
    labels = ((a <= b).all(axis=1) & (a < b).any(axis=1)).astype(np.int64)

    votes = stage_votes(ensemble, x[first], x[second])
    predicted = (votes * 2 > ensemble.size).astype(np.int64)

    tp = int(((predicted == 1) & (labels == 1)).sum())
    fp = int(((predicted == 1) & (labels == 0)).sum())
    tn = int(((predicted == 0) & (labels == 0)).sum())
    fn = int(((predicted == 0) & (labels == 1)).sum())
    confusion = Confusion(tp=tp, fp=fp, tn=tn, fn=fn)
    return SurrogateScore(confusion.accuracy_percent, confusion.f1, confusion)


def run_stats(best_errors: Sequence[float]) -> RunStats:
    """Mean and population standard deviation of per-repeat best errors."""
    if not best_errors:
        raise ValueError("need at least one repeat")
    arr = np.asarray(best_errors, dtype=np.float64)
    return RunStats(best_errors=tuple(float(v) for v in arr), mean=float(arr.mean()), std=float(arr.std()))


def front_recall(found: Iterable[Genotype], global_front: Iterable[Genotype]) -> float:
    """Share of the global Pareto set present in the found front, by genotype."""
    found_keys = {g.ops for g in found}
    global_keys = {g.ops for g in global_front}
    if not found_keys or not global_keys:
        raise ValueError("both fronts must be non-empty")
    return len(found_keys & global_keys) / len(global_keys)
