"""Tabular benchmark tables: the "true objective" oracle for the search.

A table maps every genotype to measured accuracies, parameter count and
FLOPs for one dataset.  Tables are loaded from CSV (one file per dataset),
are immutable after load, and can be regenerated bit-exactly by the
companion writer.  A deterministic synthetic table over the full space is
provided so the whole pipeline can be exercised and checked against a
brute-forced global Pareto set without any external data.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .space import (
    NUM_EDGES,
    NUM_OPERATORS,
    Genotype,
    ObjectiveVector,
)


class TableFormatError(ValueError):
    """Malformed benchmark CSV; the message names the offending line."""


class UnknownGenotypeError(KeyError):
    """Lookup of a genotype the table does not contain."""


class AccuracyField(enum.Enum):
    """Which measured accuracy defines the error objective."""

    TRAIN = "train"
    VALID = "valid"
    TEST = "test"

    @classmethod
    def from_name(cls, name: str) -> "AccuracyField":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown accuracy field {name!r}; use train/valid/test") from None


@dataclass(frozen=True)
class ArchRecord:
    """Measured metrics of one architecture on one dataset."""

    genotype: Genotype
    train_acc: float
    valid_acc: float
    test_acc: float
    params_mb: float
    flops_m: float

    def __post_init__(self) -> None:
        for name in ("train_acc", "valid_acc", "test_acc"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} must be in [0, 100], got {v}")
        if self.params_mb <= 0.0 or self.flops_m <= 0.0:
            raise ValueError("params_mb and flops_m must be positive")

    def accuracy(self, which: AccuracyField) -> float:
        if which is AccuracyField.TRAIN:
            return self.train_acc
        if which is AccuracyField.VALID:
            return self.valid_acc
        return self.test_acc


@dataclass
class BenchmarkTable:
    """Immutable genotype -> record mapping for one dataset."""

    dataset_name: str
    records: dict[tuple[int, ...], ArchRecord] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, genotype: Genotype) -> bool:
        return genotype.ops in self.records

    def genotypes(self) -> list[Genotype]:
        """All genotypes in canonical (lexicographic) order."""
        return [Genotype(ops) for ops in sorted(self.records)]

    def record(self, genotype: Genotype) -> ArchRecord:
        try:
            return self.records[genotype.ops]
        except KeyError:
            raise UnknownGenotypeError(f"genotype {genotype} not in table {self.dataset_name!r}") from None

    def objectives(self, genotype: Genotype, which: AccuracyField) -> ObjectiveVector:
        """True objective triple (100 - accuracy, params MB, FLOPs M)."""
        rec = self.record(genotype)
        return ObjectiveVector(100.0 - rec.accuracy(which), rec.params_mb, rec.flops_m)

    def param_count(self, genotype: Genotype) -> float:
        """Parameter count in MB; a training-free metric, never budget-counted."""
        return self.record(genotype).params_mb

    def objective_matrix(self, which: AccuracyField) -> tuple[list[Genotype], np.ndarray]:
        """(canonical genotype list, (n, 3) float array of objective triples)."""
        gens = self.genotypes()
        out = np.empty((len(gens), 3), dtype=np.float64)
        for i, g in enumerate(gens):
            rec = self.records[g.ops]
            out[i, 0] = 100.0 - rec.accuracy(which)
            out[i, 1] = rec.params_mb
            out[i, 2] = rec.flops_m
        return gens, out


class CountingTable:
    """Read-through view that counts distinct true-objective evaluations.

    Only :meth:`objectives` counts; parameter lookups are training-free and
    stay off the budget.  Querying the same genotype again is free.
    """

    def __init__(self, table: BenchmarkTable):
        self._table = table
        self._seen: set[tuple[int, ...]] = set()

    @property
    def dataset_name(self) -> str:
        return self._table.dataset_name

    @property
    def true_evaluations(self) -> int:
        return len(self._seen)

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, genotype: Genotype) -> bool:
        return genotype in self._table

    def genotypes(self) -> list[Genotype]:
        return self._table.genotypes()

    def record(self, genotype: Genotype) -> ArchRecord:
        return self._table.record(genotype)

    def objectives(self, genotype: Genotype, which: AccuracyField) -> ObjectiveVector:
        vec = self._table.objectives(genotype, which)
        self._seen.add(genotype.ops)
        return vec

    def param_count(self, genotype: Genotype) -> float:
        return self._table.param_count(genotype)


CSV_HEADER = ["arch", "train_acc", "valid_acc", "test_acc", "params_mb", "flops_m"]


def load_table(path: str, dataset: str) -> BenchmarkTable:
    """Load a benchmark CSV (UTF-8, header required, one row per architecture)."""
    records: dict[tuple[int, ...], ArchRecord] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableFormatError(f"{path}: empty file") from None
        if header != CSV_HEADER:
            raise TableFormatError(f"{path}: line 1: bad header {header!r}, expected {CSV_HEADER!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise TableFormatError(f"{path}: line {lineno}: expected {len(CSV_HEADER)} fields")
            try:
                genotype = Genotype.from_text(row[0])
                rec = ArchRecord(
                    genotype=genotype,
                    train_acc=float(row[1]),
                    valid_acc=float(row[2]),
                    test_acc=float(row[3]),
                    params_mb=float(row[4]),
                    flops_m=float(row[5]),
                )
            except ValueError as exc:
                raise TableFormatError(f"{path}: line {lineno}: {exc}") from None
            if genotype.ops in records:
                raise TableFormatError(f"{path}: line {lineno}: duplicate genotype {genotype}")
            records[genotype.ops] = rec
    return BenchmarkTable(dataset_name=dataset, records=records)


def write_table(table: BenchmarkTable, path: str) -> None:
    """Emit the CSV contract; float fields use shortest round-trip rendering."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for ops in sorted(table.records):
            r = table.records[ops]
            writer.writerow(
                [
                    r.genotype.to_text(),
                    repr(r.train_acc),
                    repr(r.valid_acc),
                    repr(r.test_acc),
                    repr(r.params_mb),
                    repr(r.flops_m),
                ]
            )
    os.replace(tmp, path)


# --- synthetic oracle landscape ------------------------------------------------
#
# Costs mimic a cell-based CNN: convolutions dominate both size and compute,
# and later edges are costlier (wider channels), with FLOPs growing a bit
# slower than parameters and pool/skip edges costing compute but no weights.
# Error falls off with total capacity, so both size metrics conflict with
# it.  All three metrics are smooth in the operator choices, which keeps
# dominance between two genotypes learnable from their encodings.

_PARAM_COST = np.array([0.0, 0.0, 0.09, 0.31, 0.0])
_FLOP_COST = np.array([0.0, 0.4, 9.0, 27.0, 1.6])
_QUALITY = np.array([0.0, 0.22, 0.58, 1.0, 0.15])
_PARAM_EDGE = np.array([0.55, 0.75, 0.95, 1.30, 1.65, 2.10])
_FLOP_EDGE = np.array([0.70, 0.85, 1.00, 1.20, 1.45, 1.75])


def _sub_space(size_exponent: int) -> np.ndarray:
    """All genotypes with edges >= size_exponent pinned to operator 0, as an (n, 6) array."""
    if not 1 <= size_exponent <= NUM_EDGES:
        raise ValueError(f"size_exponent must be in [1, {NUM_EDGES}]")
    n = NUM_OPERATORS**size_exponent
    ops = np.zeros((n, NUM_EDGES), dtype=np.int64)
    idx = np.arange(n)
    for pos in range(size_exponent - 1, -1, -1):
        idx, rem = np.divmod(idx, NUM_OPERATORS)
        ops[:, pos] = rem
    return ops


def synthetic_table(seed: int, size_exponent: int = NUM_EDGES) -> BenchmarkTable:
    """Deterministic full-coverage table with a brute-forceable Pareto set.

    The same seed always yields byte-identical contents.  ``size_exponent``
    shrinks the table to the 5**k sub-space with trailing edges pinned to
    operator 0 (mainly for fast tests); the default covers all 15,625 cells.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([0x5E_ED, seed])))
    pmul = _PARAM_EDGE * rng.uniform(0.9, 1.1, NUM_EDGES)
    fmul = _FLOP_EDGE * rng.uniform(0.9, 1.1, NUM_EDGES)
    qmul = rng.uniform(0.85, 1.15, NUM_EDGES)
    synergy = rng.uniform(-0.06, 0.06, (NUM_EDGES, NUM_EDGES))
    phase = rng.uniform(0.0, 2.0 * math.pi)

    ops = _sub_space(size_exponent)
    q = _QUALITY[ops]  # (n, 6)
    params = 0.071 + (_PARAM_COST[ops] * pmul).sum(axis=1)
    flops = 7.3 + (_FLOP_COST[ops] * fmul).sum(axis=1)
    capacity = (q * qmul).sum(axis=1)
    inter = np.einsum("ni,ij,nj->n", q, np.triu(synergy, k=1), q)

    err_test = 4.6 + 58.0 * np.exp(-capacity / 1.9) + 3.0 * inter
    err_test = np.clip(err_test, 0.6, 95.0)
    gap = 0.6 + 0.38 * capacity
    err_train = np.clip(err_test - gap, 0.2, 95.0)
    err_valid = np.clip(err_test + 0.35 * np.sin(3.1 * capacity + phase), 0.4, 95.0)

    records: dict[tuple[int, ...], ArchRecord] = {}
    for i in range(ops.shape[0]):
        genotype = Genotype(tuple(int(v) for v in ops[i]))
        records[genotype.ops] = ArchRecord(
            genotype=genotype,
            train_acc=float(100.0 - err_train[i]),
            valid_acc=float(100.0 - err_valid[i]),
            test_acc=float(100.0 - err_test[i]),
            params_mb=float(params[i]),
            flops_m=float(flops[i]),
        )
    return BenchmarkTable(dataset_name=f"synthetic-{seed}", records=records)


def global_pareto_front(table: BenchmarkTable, which: AccuracyField) -> list[Genotype]:
    """Exact non-dominated genotypes of the whole table, in canonical order.

    Points are processed in ascending objective-sum order: any dominator of
    a point has a strictly smaller sum, and is itself represented on the
    running front by transitivity, so each point only needs checking
    against the front accumulated so far.
    """
    gens, obj = table.objective_matrix(which)
    order = np.argsort(obj.sum(axis=1), kind="stable")
    buf = np.empty((256, 3))
    count = 0
    front_idx: list[int] = []
    for i in order:
        p = obj[i]
        f = buf[:count]
        if count and bool(((f <= p).all(axis=1) & (f < p).any(axis=1)).any()):
            continue
        if count == buf.shape[0]:
            buf = np.concatenate([buf, np.empty_like(buf)])
        buf[count] = p
        count += 1
        front_idx.append(int(i))
    return [gens[i] for i in sorted(front_idx)]
