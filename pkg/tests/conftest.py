import os

import numpy as np
import pytest

from duelnas.bench import AccuracyField, CountingTable, synthetic_table, write_table
from duelnas.pairs import sample_architectures
from duelnas.surrogate import TrainConfig, train_ensemble

REAL_TABLE_ENV = "DUELNAS_BENCH_DIR"


def real_table_path(name: str = "cifar10.csv") -> str | None:
    """Path of a real benchmark CSV if one is available, else None."""
    for base in (os.environ.get(REAL_TABLE_ENV), os.path.join(os.path.dirname(__file__), "..", "data")):
        if base:
            candidate = os.path.join(base, name)
            if os.path.exists(candidate):
                return candidate
    return None


requires_real_table = pytest.mark.skipif(
    real_table_path() is None,
    reason="real benchmark table not available (set DUELNAS_BENCH_DIR)",
)


@pytest.fixture(scope="session")
def small_table():
    """5^3 synthetic table: fast to scan exhaustively."""
    return synthetic_table(0, 3)


@pytest.fixture(scope="session")
def full_table():
    """Full 5^6 synthetic table (the default synthetic benchmark)."""
    return synthetic_table(0)


@pytest.fixture(scope="session")
def full_table_csv(full_table, tmp_path_factory):
    path = tmp_path_factory.mktemp("bench") / "synthetic0.csv"
    write_table(full_table, str(path))
    return str(path)


@pytest.fixture(scope="session")
def tiny_ensemble(small_table):
    """A small but genuinely trained ensemble, reused across tests."""
    counting = CountingTable(small_table)
    rng = np.random.default_rng(11)
    ds = sample_architectures(counting, 80, AccuracyField.TRAIN, rng)
    ensemble = train_ensemble(ds, 3, TrainConfig(epochs=8, batch_size=50), rounds=25, rng=rng)
    return ds, ensemble
