"""Cell-based architecture search space: genotypes, one-hot encoding, repair.

An architecture is a cell with six edges, each carrying one of five
operators.  The canonical operator order below fixes which one-hot column
belongs to which operator; it must match the convention of whatever
benchmark table the genotypes are looked up in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

OPERATORS = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3")
NUM_OPERATORS = len(OPERATORS)
NUM_EDGES = 6
TOTAL_BITS = NUM_EDGES * NUM_OPERATORS  # 30
SPACE_SIZE = NUM_OPERATORS**NUM_EDGES  # 15_625


class InvalidEncodingError(ValueError):
    """A 30-bit vector whose 5-bit groups are not all one-hot."""


@dataclass(frozen=True)
class Genotype:
    """Six operator indices, one per cell edge, each in [0, 4]."""

    ops: tuple[int, ...]

    def __post_init__(self) -> None:
        ops = tuple(int(o) for o in self.ops)
        if len(ops) != NUM_EDGES:
            raise ValueError(f"genotype needs {NUM_EDGES} operator indices, got {len(ops)}")
        if any(o < 0 or o >= NUM_OPERATORS for o in ops):
            raise ValueError(f"operator indices must be in [0, {NUM_OPERATORS - 1}]: {ops}")
        object.__setattr__(self, "ops", ops)

    def to_text(self) -> str:
        """Dash-joined form used in files and on the CLI, e.g. '1-0-3-2-4-0'."""
        return "-".join(str(o) for o in self.ops)

    @classmethod
    def from_text(cls, text: str) -> "Genotype":
        parts = text.strip().split("-")
        if len(parts) != NUM_EDGES or not all(p.isdigit() for p in parts):
            raise ValueError(f"malformed genotype string: {text!r}")
        return cls(tuple(int(p) for p in parts))

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class OneHotBits:
    """30-bit one-hot encoding of a genotype: six groups of five bits."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != TOTAL_BITS or any(b not in (0, 1) for b in bits):
            raise InvalidEncodingError(f"expected {TOTAL_BITS} binary entries")
        for edge in range(NUM_EDGES):
            group = bits[edge * NUM_OPERATORS : (edge + 1) * NUM_OPERATORS]
            if sum(group) != 1:
                raise InvalidEncodingError(
                    f"group {edge} is {''.join(map(str, group))}, expected exactly one set bit"
                )
        object.__setattr__(self, "bits", bits)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.float64)

    def packed(self) -> bytes:
        """Hashable byte key; equal for equal bit patterns."""
        return bytes(self.bits)


@dataclass(frozen=True)
class ObjectiveVector:
    """(error %, params MB, FLOPs M); all three are minimized."""

    error: float
    params: float
    flops: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.error <= 100.0:
            raise ValueError(f"error must be in [0, 100], got {self.error}")
        if self.params <= 0.0 or self.flops <= 0.0:
            raise ValueError("params and flops must be positive")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.error, self.params, self.flops)


def encode(genotype: Genotype) -> OneHotBits:
    """One-hot encode: bit 5*i + ops[i] is set for each edge i."""
    bits = [0] * TOTAL_BITS
    for i, op in enumerate(genotype.ops):
        bits[i * NUM_OPERATORS + op] = 1
    return OneHotBits(tuple(bits))


def decode(bits: OneHotBits | Sequence[int]) -> Genotype:
    """Inverse of :func:`encode`.

    Raises InvalidEncodingError if any 5-bit group is not one-hot.
    """
    if not isinstance(bits, OneHotBits):
        bits = OneHotBits(tuple(int(b) for b in bits))
    ops = []
    for edge in range(NUM_EDGES):
        group = bits.bits[edge * NUM_OPERATORS : (edge + 1) * NUM_OPERATORS]
        ops.append(group.index(1))
    return Genotype(tuple(ops))


def repair(raw: Iterable[int], rng: np.random.Generator) -> OneHotBits:
    """Force every 5-bit group of a raw 30-bit vector to be one-hot.

    Valid groups pass through unchanged.  A group with several set bits
    keeps one of them, chosen uniformly; an all-zero group gets a
    uniformly chosen bit set.
    """
    bits = [1 if b else 0 for b in raw]
    if len(bits) != TOTAL_BITS:
        raise ValueError(f"expected {TOTAL_BITS} bits, got {len(bits)}")
    for edge in range(NUM_EDGES):
        lo = edge * NUM_OPERATORS
        ones = [i for i in range(lo, lo + NUM_OPERATORS) if bits[i]]
        if len(ones) == 1:
            continue
        if ones:
            keep = ones[rng.integers(len(ones))]
            for i in ones:
                bits[i] = 1 if i == keep else 0
        else:
            bits[lo + rng.integers(NUM_OPERATORS)] = 1
    return OneHotBits(tuple(bits))


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """Pareto dominance: a is no worse everywhere and strictly better somewhere."""
    return (
        a.error <= b.error
        and a.params <= b.params
        and a.flops <= b.flops
        and (a.error < b.error or a.params < b.params or a.flops < b.flops)
    )


def dominates_values(a: tuple[float, float, float], b: tuple[float, float, float]) -> bool:
    """Dominance on raw (error, params, flops) triples; used in hot loops."""
    return (
        a[0] <= b[0]
        and a[1] <= b[1]
        and a[2] <= b[2]
        and (a[0] < b[0] or a[1] < b[1] or a[2] < b[2])
    )


def random_genotype(rng: np.random.Generator) -> Genotype:
    """Uniform draw: each edge operator independent uniform over [0, 4]."""
    return Genotype(tuple(int(v) for v in rng.integers(0, NUM_OPERATORS, size=NUM_EDGES)))


def all_genotypes() -> list[Genotype]:
    """The whole space in lexicographic order of the operator tuple."""
    out = []
    for idx in range(SPACE_SIZE):
        ops = []
        rem = idx
        for _ in range(NUM_EDGES):
            rem, op = divmod(rem, NUM_OPERATORS)
            ops.append(op)
        out.append(Genotype(tuple(reversed(ops))))
    return out
