"""Learned pairwise dominance comparator.

One block embeds both 30-bit architecture encodings with a single shared
30->32 ReLU layer, takes the difference of the two embeddings, and pushes
it through a 32->32->1 ReLU/sigmoid classifier head.  The output is the
probability that the first architecture dominates the second.  An odd
number of independently trained blocks vote in two stages: first on the
ordered pair, then (only if that vote fails) on the swapped pair; if both
votes fail the pair is declared incomparable.

Everything is plain float64 numpy; training is mini-batch Adam on binary
cross-entropy with exact hand-derived gradients, so runs are reproducible
bit-for-bit from a seed.
"""

from __future__ import annotations

import enum
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import pairs as pairs_mod
from .space import TOTAL_BITS, OneHotBits

EMBED_DIM = 32
HIDDEN_DIM = 32
_PROB_EPS = 1e-7  # clamp inside the BCE log only; gradients use the unclamped form

PARAM_FIELDS = ("embed_w", "embed_b", "hidden_w", "hidden_b", "out_w", "out_b")


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite during training."""


class EnsembleFormatError(ValueError):
    """Ensemble file is corrupt or not an ensemble file."""


class EnsembleVersionError(EnsembleFormatError):
    """Ensemble file uses an unsupported format version."""


class DominanceRelation(enum.Enum):
    FIRST_DOMINATES = 1
    SECOND_DOMINATES = 2
    INCOMPARABLE = 0


@dataclass
class TrainConfig:
    """Optimiser settings for one block."""

    learning_rate: float = 0.001
    batch_size: int = 100
    epochs: int = 20
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class SiameseBlock:
    """Weights of one pairwise classifier; the embedder is shared by construction."""

    embed_w: np.ndarray  # (30, 32)
    embed_b: np.ndarray  # (32,)
    hidden_w: np.ndarray  # (32, 32)
    hidden_b: np.ndarray  # (32,)
    out_w: np.ndarray  # (32,)
    out_b: np.ndarray  # (1,)
    epoch_losses: list[float] = field(default_factory=list)

    @classmethod
    def initialize(cls, rng: np.random.Generator) -> "SiameseBlock":
        """Glorot-uniform weights, zero biases; draws in layer order."""

        def glorot(fan_in: int, fan_out: int, shape: tuple[int, ...]) -> np.ndarray:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-bound, bound, size=shape)

        return cls(
            embed_w=glorot(TOTAL_BITS, EMBED_DIM, (TOTAL_BITS, EMBED_DIM)),
            embed_b=np.zeros(EMBED_DIM),
            hidden_w=glorot(EMBED_DIM, HIDDEN_DIM, (EMBED_DIM, HIDDEN_DIM)),
            hidden_b=np.zeros(HIDDEN_DIM),
            out_w=glorot(HIDDEN_DIM, 1, (HIDDEN_DIM,)),
            out_b=np.zeros(1),
        )

    @classmethod
    def zeros(cls) -> "SiameseBlock":
        return cls(
            embed_w=np.zeros((TOTAL_BITS, EMBED_DIM)),
            embed_b=np.zeros(EMBED_DIM),
            hidden_w=np.zeros((EMBED_DIM, HIDDEN_DIM)),
            hidden_b=np.zeros(HIDDEN_DIM),
            out_w=np.zeros(HIDDEN_DIM),
            out_b=np.zeros(1),
        )

    def copy(self) -> "SiameseBlock":
        return SiameseBlock(
            embed_w=self.embed_w.copy(),
            embed_b=self.embed_b.copy(),
            hidden_w=self.hidden_w.copy(),
            hidden_b=self.hidden_b.copy(),
            out_w=self.out_w.copy(),
            out_b=self.out_b.copy(),
        )


@dataclass(frozen=True)
class Grads:
    embed_w: np.ndarray
    embed_b: np.ndarray
    hidden_w: np.ndarray
    hidden_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray


@dataclass(frozen=True)
class Ensemble:
    """An odd number of independently trained blocks voting by majority."""

    blocks: tuple[SiameseBlock, ...]

    def __post_init__(self) -> None:
        n = len(self.blocks)
        if n < 1 or n % 2 == 0:
            raise ValueError(f"ensemble size must be odd and >= 1, got {n}")

    @property
    def size(self) -> int:
        return len(self.blocks)


def _as_matrix(x) -> np.ndarray:
    """Coerce bit vectors / batches of bit vectors into a (n, 30) float matrix."""
    if isinstance(x, OneHotBits):
        return x.as_array()[None, :]
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[-1] != TOTAL_BITS:
        raise ValueError(f"expected {TOTAL_BITS}-bit inputs, got shape {arr.shape}")
    return arr


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logits(blk: SiameseBlock, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    e1 = np.maximum(x1 @ blk.embed_w + blk.embed_b, 0.0)
    e2 = np.maximum(x2 @ blk.embed_w + blk.embed_b, 0.0)
    h = np.maximum((e1 - e2) @ blk.hidden_w + blk.hidden_b, 0.0)
    return h @ blk.out_w + blk.out_b[0]


def forward(blk: SiameseBlock, x1, x2) -> float:
    """Probability that the first architecture dominates the second."""
    z = _logits(blk, _as_matrix(x1), _as_matrix(x2))
    return float(_sigmoid(z)[0])


def forward_batch(blk: SiameseBlock, x1, x2) -> np.ndarray:
    return _sigmoid(_logits(blk, _as_matrix(x1), _as_matrix(x2)))


def predict_bit(blk: SiameseBlock, x1, x2) -> int:
    """Rounded prediction; the 0.5 tie maps to 1."""
    return int(forward(blk, x1, x2) >= 0.5)


def loss_and_grads(blk: SiameseBlock, x1, x2, labels) -> tuple[float, Grads]:
    """Mean BCE over the batch and its exact gradients.

    Gradients from both branches accumulate into the one shared embedder.
    """
    x1 = _as_matrix(x1)
    x2 = _as_matrix(x2)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    n = x1.shape[0]
    if n == 0:
        raise ValueError("batch must be non-empty")

    pre1 = x1 @ blk.embed_w + blk.embed_b
    pre2 = x2 @ blk.embed_w + blk.embed_b
    e1 = np.maximum(pre1, 0.0)
    e2 = np.maximum(pre2, 0.0)
    d = e1 - e2
    pre_h = d @ blk.hidden_w + blk.hidden_b
    h = np.maximum(pre_h, 0.0)
    z = h @ blk.out_w + blk.out_b[0]
    p = _sigmoid(z)

    pc = np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
    loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))

    dz = (p - y) / n
    g_out_w = h.T @ dz
    g_out_b = np.array([dz.sum()])
    dh = np.outer(dz, blk.out_w) * (pre_h > 0.0)
    g_hidden_w = d.T @ dh
    g_hidden_b = dh.sum(axis=0)
    dd = dh @ blk.hidden_w.T
    de1 = dd * (pre1 > 0.0)
    de2 = -dd * (pre2 > 0.0)
    g_embed_w = x1.T @ de1 + x2.T @ de2
    g_embed_b = de1.sum(axis=0) + de2.sum(axis=0)

    return loss, Grads(g_embed_w, g_embed_b, g_hidden_w, g_hidden_b, g_out_w, g_out_b)


def train_block(blk: SiameseBlock, pair_inputs, labels, hyper: TrainConfig, rng: np.random.Generator) -> SiameseBlock:
    """Adam over shuffled mini-batches; returns a trained copy of the block.

    ``pair_inputs`` is either an (X1, X2) pair of (n, 30) matrices or a
    sequence of (first_bits, second_bits) tuples.  The full-set loss after
    each epoch is recorded on the returned block's ``epoch_losses``.
    """
    if isinstance(pair_inputs, tuple) and len(pair_inputs) == 2 and not isinstance(pair_inputs[0], OneHotBits):
        x1, x2 = (_as_matrix(m) for m in pair_inputs)
    else:
        x1 = _as_matrix(np.stack([_as_matrix(a)[0] for a, _ in pair_inputs]))
        x2 = _as_matrix(np.stack([_as_matrix(b)[0] for _, b in pair_inputs]))
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    n = x1.shape[0]
    if n != x2.shape[0] or n != y.shape[0] or n < 1:
        raise ValueError("pairs and labels must be non-empty and of equal length")

    out = blk.copy()
    params = [getattr(out, name) for name in PARAM_FIELDS]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = hyper.adam_beta1, hyper.adam_beta2, hyper.adam_epsilon
    step = 0

    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, hyper.batch_size):
            sel = order[lo : lo + hyper.batch_size]
            loss, grads = loss_and_grads(out, x1[sel], x2[sel], y[sel])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, batch offset {lo}"
                )
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step
            for i, g in enumerate((getattr(grads, name) for name in PARAM_FIELDS)):
                m[i] = b1 * m[i] + (1.0 - b1) * g
                v[i] = b2 * v[i] + (1.0 - b2) * g * g
                params[i] -= hyper.learning_rate * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)
        out.epoch_losses.append(_full_set_loss(out, x1, x2, y))
    return out


def _full_set_loss(blk: SiameseBlock, x1: np.ndarray, x2: np.ndarray, y: np.ndarray) -> float:
    p = forward_batch(blk, x1, x2)
    pc = np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
    return float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def train_ensemble(
    samples,
    nm: int,
    hyper: TrainConfig | None = None,
    rounds: int = 100,
    rng: np.random.Generator | None = None,
) -> Ensemble:
    """Train ``nm`` blocks, each on its own freshly assembled pair set.

    Every block gets an independently derived rng stream, so blocks differ
    even though they are built from the same evaluated sample.
    """
    if nm < 1 or nm % 2 == 0:
        raise ValueError(f"ensemble size must be odd and >= 1, got {nm}")
    hyper = hyper or TrainConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    blocks = []
    for child in rng.spawn(nm):
        blk = SiameseBlock.initialize(child)
        training = pairs_mod.assemble_training_set(samples, rounds=rounds, rng=child)
        x1, x2, y = pairs_mod.training_matrices(training)
        blocks.append(train_block(blk, (x1, x2), y, hyper, child))
    return Ensemble(blocks=tuple(blocks))


def untrained_ensemble(nm: int, rng: np.random.Generator) -> Ensemble:
    """Freshly initialized blocks; the no-training baseline."""
    return Ensemble(blocks=tuple(SiameseBlock.initialize(child) for child in rng.spawn(nm)))


def ensemble_predict(ensemble: Ensemble, x1, x2) -> DominanceRelation:
    """Two-stage majority vote on an ordered pair of architectures.

    Bitwise-identical inputs are incomparable by rule, without querying any
    block (the difference vector is structurally zero, but a sigmoid head
    gives no guarantee below 0.5 there).
    """
    k1 = x1.packed() if isinstance(x1, OneHotBits) else bytes(np.asarray(x1, dtype=np.uint8))
    k2 = x2.packed() if isinstance(x2, OneHotBits) else bytes(np.asarray(x2, dtype=np.uint8))
    if k1 == k2:
        return DominanceRelation.INCOMPARABLE
    half = ensemble.size / 2.0
    if sum(predict_bit(blk, x1, x2) for blk in ensemble.blocks) > half:
        return DominanceRelation.FIRST_DOMINATES
    if sum(predict_bit(blk, x2, x1) for blk in ensemble.blocks) > half:
        return DominanceRelation.SECOND_DOMINATES
    return DominanceRelation.INCOMPARABLE


def stage_votes(ensemble: Ensemble, x1, x2) -> np.ndarray:
    """Per-pair count of blocks voting "first dominates second" (vectorized)."""
    x1 = _as_matrix(x1)
    x2 = _as_matrix(x2)
    votes = np.zeros(x1.shape[0], dtype=np.int64)
    for blk in ensemble.blocks:
        votes += _logits(blk, x1, x2) >= 0.0  # sigmoid(z) >= 0.5 iff z >= 0
    return votes


def pairwise_votes(ensemble: Ensemble, x: np.ndarray) -> np.ndarray:
    """votes[i, j] = blocks voting that row i dominates row j, for all ordered pairs."""
    x = _as_matrix(x)
    u = x.shape[0]
    votes = np.zeros((u, u), dtype=np.int64)
    for blk in ensemble.blocks:
        e = np.maximum(x @ blk.embed_w + blk.embed_b, 0.0)
        d = e[:, None, :] - e[None, :, :]
        h = np.maximum(d @ blk.hidden_w + blk.hidden_b, 0.0)
        z = h @ blk.out_w + blk.out_b[0]
        votes += z >= 0.0
    return votes


# --- serialization ---------------------------------------------------------------
#
# Layout (little-endian): 8-byte magic "DUELENS\0", uint32 version (=1),
# uint32 block count, then for each block six tensors in PARAM_FIELDS order,
# each as uint32 ndim, ndim * uint32 dims, and row-major float64 data.

_MAGIC = b"DUELENS\x00"
_VERSION = 1


def save_ensemble(ensemble: Ensemble, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, ensemble.size))
        for blk in ensemble.blocks:
            for name in PARAM_FIELDS:
                arr = np.ascontiguousarray(getattr(blk, name), dtype="<f8")
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.tobytes())
    os.replace(tmp, path)


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise EnsembleFormatError("truncated ensemble file")
    return data


def load_ensemble(path: str) -> Ensemble:
    expected_shapes = {
        "embed_w": (TOTAL_BITS, EMBED_DIM),
        "embed_b": (EMBED_DIM,),
        "hidden_w": (EMBED_DIM, HIDDEN_DIM),
        "hidden_b": (HIDDEN_DIM,),
        "out_w": (HIDDEN_DIM,),
        "out_b": (1,),
    }
    with open(path, "rb") as fh:
        if _read_exact(fh, len(_MAGIC)) != _MAGIC:
            raise EnsembleFormatError(f"{path}: not an ensemble file")
        version, count = struct.unpack("<II", _read_exact(fh, 8))
        if version != _VERSION:
            raise EnsembleVersionError(f"{path}: format version {version}, expected {_VERSION}")
        blocks = []
        for _ in range(count):
            tensors = {}
            for name in PARAM_FIELDS:
                (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
                shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
                if shape != expected_shapes[name]:
                    raise EnsembleFormatError(f"{path}: tensor {name} has shape {shape}")
                size = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(_read_exact(fh, 8 * size), dtype="<f8")
                tensors[name] = data.reshape(shape).astype(np.float64)
            blocks.append(SiameseBlock(**tensors))
        if fh.read(1):
            raise EnsembleFormatError(f"{path}: trailing data")
    return Ensemble(blocks=tuple(blocks))
