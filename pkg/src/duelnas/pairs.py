"""Training-data pipeline for the dominance comparator.

A small sample of architectures with true objective values is expanded
into a large labeled pair set: each round shuffles the sample against
itself to form ordered pairs, then rebalances the heavily negative-skewed
labels by probabilistically replacing the second element of non-dominating
pairs with something the first element does dominate.  Rounds are
concatenated, duplicates and all; the label of a pair is always recomputed
from the objective vectors, never stored stale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .space import Genotype, ObjectiveVector, OneHotBits, dominates, encode


@dataclass(frozen=True)
class Sample:
    """One evaluated architecture: genotype, its encoding and true objectives."""

    genotype: Genotype
    bits: OneHotBits
    objectives: ObjectiveVector


@dataclass(frozen=True)
class TrainingPair:
    first: Sample
    second: Sample
    label: int

    def __post_init__(self) -> None:
        if self.label != int(dominates(self.first.objectives, self.second.objectives)):
            raise ValueError("label inconsistent with the pair's objective vectors")

    @classmethod
    def from_samples(cls, first: Sample, second: Sample) -> "TrainingPair":
        return cls(first, second, int(dominates(first.objectives, second.objectives)))


def sample_architectures(table, ns: int, which, rng: np.random.Generator) -> list[Sample]:
    """Draw ``ns`` distinct architectures uniformly and evaluate their objectives.

    Sampling is over the table's canonical genotype order, so the draw
    depends only on the table contents and the rng state.
    """
    gens = table.genotypes()
    if ns > len(gens):
        raise ValueError(f"cannot sample {ns} architectures from a table of {len(gens)}")
    chosen = rng.choice(len(gens), size=ns, replace=False)
    out = []
    for idx in chosen:
        g = gens[int(idx)]
        out.append(Sample(genotype=g, bits=encode(g), objectives=table.objectives(g, which)))
    return out


def build_pair_round(ds: list[Sample], rng: np.random.Generator) -> list[tuple[Sample, Sample]]:
    """Pair each sample with a shuffled copy of the sample set: (ds[i], shuffled[i])."""
    if not ds:
        raise ValueError("sample set must be non-empty")
    perm = rng.permutation(len(ds))
    return [(ds[i], ds[int(perm[i])]) for i in range(len(ds))]


def rebalance_theta(sigma: float) -> float:
    """Replacement probability for non-dominating pairs, clamped into [0, 1].

    Callers must skip rebalancing entirely at sigma == 1 (the formula's
    denominator vanishes there).
    """
    return min(1.0, 0.5 / (1.0 - sigma))


def _dominated_indices(ds: list[Sample]) -> list[np.ndarray]:
    """dominated[i] = indices of samples that ds[i] dominates."""
    obj = np.array([s.objectives.as_tuple() for s in ds])
    le = (obj[:, None, :] <= obj[None, :, :]).all(axis=2)
    lt = (obj[:, None, :] < obj[None, :, :]).any(axis=2)
    dom = le & lt
    return [np.flatnonzero(row) for row in dom]


def rebalance_pairs(
    pair_round: list[tuple[Sample, Sample]],
    ds: list[Sample],
    rng: np.random.Generator,
    _dominated: list[np.ndarray] | None = None,
) -> list[tuple[Sample, Sample]]:
    """Push the positive-label share of one pair round toward one half.

    With sigma the fraction of pairs whose first element already dominates
    the second, each non-dominating pair gets its second element replaced
    with probability theta = min(1, 0.5 / (1 - sigma)), by a uniform choice
    among the sample elements its first element dominates (unchanged when
    there are none).  The theta draw is consumed for every pair, dominating
    or not, so the stream layout is fixed.
    """
    if _dominated is None:
        _dominated = _dominated_indices(ds)
    index_of = {id(s): i for i, s in enumerate(ds)}

    dominating = [dominates(a.objectives, b.objectives) for a, b in pair_round]
    sigma = sum(dominating) / len(pair_round)
    if sigma >= 1.0:
        return list(pair_round)
    theta = rebalance_theta(sigma)

    out = []
    for (first, second), is_pos in zip(pair_round, dominating):
        r = rng.random()
        if not is_pos and r < theta:
            cands = _dominated[index_of[id(first)]]
            if len(cands):
                second = ds[int(cands[rng.integers(len(cands))])]
        out.append((first, second))
    return out


def assemble_training_set(ds: list[Sample], rounds: int = 100, rng: np.random.Generator | None = None) -> list[TrainingPair]:
    """Concatenate ``rounds`` shuffled-and-rebalanced pair rounds, labeled.

    Rounds are kept as a multiset: duplicates across rounds are the point
    of the amplification, so nothing is deduplicated.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    dominated = _dominated_indices(ds)
    out: list[TrainingPair] = []
    for _ in range(rounds):
        pair_round = rebalance_pairs(build_pair_round(ds, rng), ds, rng, _dominated=dominated)
        out.extend(TrainingPair.from_samples(a, b) for a, b in pair_round)
    return out


def training_matrices(training: list[TrainingPair]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a pair set into (X1, X2, labels) float matrices for training."""
    cache: dict[tuple[int, ...], np.ndarray] = {}

    def row(s: Sample) -> np.ndarray:
        arr = cache.get(s.genotype.ops)
        if arr is None:
            arr = s.bits.as_array()
            cache[s.genotype.ops] = arr
        return arr

    x1 = np.stack([row(p.first) for p in training])
    x2 = np.stack([row(p.second) for p in training])
    y = np.array([p.label for p in training], dtype=np.float64)
    return x1, x2, y


def positive_fraction(training: list[TrainingPair]) -> float:
    return sum(p.label for p in training) / len(training)


def dump_training_set(training: list[TrainingPair], path: str) -> None:
    """Debug CSV of a pair set: first_arch,second_arch,label."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["first_arch", "second_arch", "label"])
        for p in training:
            writer.writerow([p.first.genotype.to_text(), p.second.genotype.to_text(), p.label])
