import numpy as np
import pytest

from duelnas.bench import AccuracyField
from duelnas.metrics import (
    Confusion,
    InsufficientArchitecturesError,
    evaluate_surrogate,
    front_recall,
    run_stats,
)
from duelnas.space import Genotype, decode, dominates
from duelnas.surrogate import Ensemble, SiameseBlock


def constant_ensemble(bit: int) -> Ensemble:
    """A single zero block biased to always vote the given bit."""
    blk = SiameseBlock.zeros()
    blk.out_b[0] = 10.0 if bit else -10.0
    return Ensemble(blocks=(blk,))


def test_confusion_formulas():
    c = Confusion(tp=2, fp=1, tn=6, fn=1)
    assert c.accuracy_percent == pytest.approx(80.0)
    assert c.f1 == pytest.approx(0.667, abs=1e-3)
    assert c.accuracy_percent == 100.0 * (c.tp + c.tn) / (c.tp + c.fp + c.tn + c.fn)


def test_confusion_f1_zero_when_no_true_positives():
    assert Confusion(tp=0, fp=0, tn=10, fn=0).f1 == 0.0
    assert Confusion(tp=0, fp=3, tn=10, fn=2).f1 == 0.0


def test_confusion_rejects_negative_counts():
    with pytest.raises(ValueError):
        Confusion(tp=-1, fp=0, tn=0, fn=0)


def test_evaluate_constant_zero_stub(small_table):
    score = evaluate_surrogate(
        constant_ensemble(0), small_table, [], 2000, AccuracyField.TEST, np.random.default_rng(0)
    )
    assert score.f1 == 0.0
    assert score.confusion.tp == 0 and score.confusion.fp == 0
    negatives = score.confusion.tn + score.confusion.fn
    assert negatives == 2000
    assert score.accuracy == pytest.approx(100.0 * score.confusion.tn / 2000)


def test_evaluate_constant_one_stub(small_table):
    score = evaluate_surrogate(
        constant_ensemble(1), small_table, [], 2000, AccuracyField.TEST, np.random.default_rng(0)
    )
    # accuracy of an always-positive classifier equals the positive rate
    positives = score.confusion.tp + score.confusion.fn
    assert score.confusion.fn == 0 and score.confusion.tn == 0
    assert score.accuracy == pytest.approx(100.0 * positives / 2000)


def test_evaluate_oracle_predictor_is_perfect(small_table, monkeypatch):
    import duelnas.metrics as metrics_mod

    def oracle_votes(_ensemble, x1, x2):
        out = np.zeros(x1.shape[0], dtype=np.int64)
        for i in range(x1.shape[0]):
            a = small_table.objectives(decode(x1[i].astype(int)), AccuracyField.TEST)
            b = small_table.objectives(decode(x2[i].astype(int)), AccuracyField.TEST)
            out[i] = int(dominates(a, b))
        return out

    monkeypatch.setattr(metrics_mod, "stage_votes", oracle_votes)
    score = evaluate_surrogate(
        constant_ensemble(0), small_table, [], 500, AccuracyField.TEST, np.random.default_rng(1)
    )
    assert score.accuracy == 100.0
    assert score.f1 == 1.0


def test_evaluate_respects_exclusion(small_table):
    gens = small_table.genotypes()
    keep = gens[:2]
    excluded = gens[2:]
    rng = np.random.default_rng(2)
    score = evaluate_surrogate(constant_ensemble(0), small_table, excluded, 100, AccuracyField.TEST, rng)
    assert score.confusion.total == 100
    with pytest.raises(InsufficientArchitecturesError):
        evaluate_surrogate(constant_ensemble(0), small_table, gens[1:], 10, AccuracyField.TEST, rng)


def test_evaluate_rejects_nonpositive_pairs(small_table):
    with pytest.raises(ValueError):
        evaluate_surrogate(constant_ensemble(0), small_table, [], 0, AccuracyField.TEST, np.random.default_rng(0))


def test_evaluate_trained_ensemble_is_informative(small_table, tiny_ensemble):
    ds, ensemble = tiny_ensemble
    score = evaluate_surrogate(
        ensemble, small_table, [s.genotype for s in ds], 4000, AccuracyField.TRAIN, np.random.default_rng(3)
    )
    assert score.accuracy > 80.0
    assert score.f1 > 0.3
    assert score.confusion.tp > 0


def test_run_stats_examples():
    stats = run_stats([5.63] * 10)
    assert stats.mean == pytest.approx(5.63)
    assert stats.std == pytest.approx(0.0)
    assert stats.repeats == 10

    stats = run_stats([1.0, 3.0])
    assert stats.mean == pytest.approx(2.0)
    assert stats.std == pytest.approx(1.0)  # population std

    assert run_stats([4.2]).std == 0.0
    with pytest.raises(ValueError):
        run_stats([])


def test_front_recall():
    a = [Genotype((0,) * 6), Genotype((1, 0, 0, 0, 0, 0))]
    b = [Genotype((0,) * 6), Genotype((1, 0, 0, 0, 0, 0))]
    assert front_recall(a, b) == 1.0
    c = [Genotype((2, 0, 0, 0, 0, 0))]
    assert front_recall(c, b) == 0.0
    assert front_recall(a, [b[0]]) == 1.0
    assert front_recall([a[0]], b) == 0.5
    with pytest.raises(ValueError):
        front_recall([], b)
