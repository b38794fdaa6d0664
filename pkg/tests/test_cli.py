import json
import os

import numpy as np
import pytest

from duelnas.bench import load_table, write_table
from duelnas.cli import main
from duelnas.space import Genotype, dominates
from duelnas.surrogate import load_ensemble


@pytest.fixture(scope="module")
def small_csv(small_table, tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "small.csv"
    write_table(small_table, str(path))
    return str(path)


def run_cli(*args) -> int:
    return main([str(a) for a in args])


TINY_TRAIN = ["--ns", 30, "--nm", 1, "--rounds", 2, "--epochs", 1, "--batch-size", 20]


def test_gen_synthetic_writes_table_and_front(tmp_path):
    out = tmp_path / "syn.csv"
    front_out = tmp_path / "front.csv"
    assert run_cli("gen-synthetic", "--seed", 3, "--size-exponent", 2, "--out", out, "--front-out", front_out) == 0
    table = load_table(str(out), "syn")
    assert len(table) == 25
    lines = front_out.read_text().strip().splitlines()
    assert lines[0] == "arch,error,params_mb,flops_m"
    assert len(lines) > 1


def test_gen_synthetic_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("gen-synthetic", "--seed", 5, "--size-exponent", 2, "--out", a) == 0
    assert run_cli("gen-synthetic", "--seed", 5, "--size-exponent", 2, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.front.csv").read_bytes() == (tmp_path / "b.csv.front.csv").read_bytes()


def test_gen_synthetic_front_is_non_dominated_by_independent_scan(tmp_path):
    out = tmp_path / "syn.csv"
    assert run_cli("gen-synthetic", "--seed", 1, "--size-exponent", 3, "--out", out) == 0
    table = load_table(str(out), "syn")
    from duelnas.bench import AccuracyField

    front_lines = (tmp_path / "syn.csv.front.csv").read_text().strip().splitlines()[1:]
    front = [Genotype.from_text(line.split(",")[0]) for line in front_lines]
    objs = {g.ops: table.objectives(g, AccuracyField.TEST) for g in table.genotypes()}
    for g in front:
        assert not any(dominates(o, objs[g.ops]) for o in objs.values())


def test_gen_synthetic_bad_out_path(tmp_path):
    assert run_cli("gen-synthetic", "--seed", 1, "--out", tmp_path / "no_dir" / "x.csv") == 2


def test_train_surrogate_writes_ensemble(tmp_path, small_csv):
    out = tmp_path / "ens.bin"
    code = run_cli("train-surrogate", "--bench-file", small_csv, "--seed", 1, *TINY_TRAIN, "--out", out)
    assert code == 0
    assert load_ensemble(str(out)).size == 1


def test_train_surrogate_rejects_even_nm(tmp_path, small_csv):
    out = tmp_path / "ens.bin"
    code = run_cli("train-surrogate", "--bench-file", small_csv, "--nm", 6, "--ns", 30, "--out", out)
    assert code == 1
    assert not out.exists()


def test_missing_bench_file_names_path(tmp_path, capsys):
    code = run_cli("train-surrogate", "--bench-file", "no_such_table.csv", "--out", tmp_path / "e.bin")
    assert code == 2
    assert "no_such_table.csv" in capsys.readouterr().err


def test_bench_dir_env_var(tmp_path, small_csv, monkeypatch):
    monkeypatch.setenv("DUELNAS_BENCH_DIR", os.path.dirname(small_csv))
    out = tmp_path / "ens.bin"
    code = run_cli("train-surrogate", "--bench-file", os.path.basename(small_csv), "--seed", 1, *TINY_TRAIN, "--out", out)
    assert code == 0


def test_eval_surrogate_single(tmp_path, small_csv):
    ens = tmp_path / "ens.bin"
    assert run_cli("train-surrogate", "--bench-file", small_csv, "--seed", 2, *TINY_TRAIN, "--out", ens) == 0
    out = tmp_path / "metrics.json"
    csv_out = tmp_path / "metrics.csv"
    code = run_cli(
        "eval-surrogate", "--bench-file", small_csv, "--ensemble", ens,
        "--pairs", 500, "--seed", 2, "--holdout-ns", 30,
        "--out", out, "--csv-out", csv_out,
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert set(payload["rows"][0]) == {"accuracy", "f1", "tp", "fp", "tn", "fn"}
    lines = csv_out.read_text().strip().splitlines()
    assert lines[0] == "metric,value"
    assert any(line.startswith("accuracy,") for line in lines)


def test_eval_surrogate_rejects_zero_pairs(small_csv, tmp_path):
    ens = tmp_path / "ens.bin"
    assert run_cli("train-surrogate", "--bench-file", small_csv, "--seed", 2, *TINY_TRAIN, "--out", ens) == 0
    assert run_cli("eval-surrogate", "--bench-file", small_csv, "--ensemble", ens, "--pairs", 0) == 1


def test_eval_surrogate_requires_ensemble_or_sweep(small_csv):
    assert run_cli("eval-surrogate", "--bench-file", small_csv, "--pairs", 10) == 1


def test_eval_surrogate_sweep_nm(tmp_path, small_csv):
    out = tmp_path / "sweep.json"
    code = run_cli(
        "eval-surrogate", "--bench-file", small_csv, "--sweep-nm", "1,3",
        "--pairs", 300, "--seed", 3, *TINY_TRAIN, "--out", out,
    )
    assert code == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["nm"] for r in rows] == [1, 3]


def test_eval_surrogate_sweep_ns_has_baseline_row(tmp_path, small_csv):
    out = tmp_path / "sweep.json"
    code = run_cli(
        "eval-surrogate", "--bench-file", small_csv, "--sweep-ns", "20,40",
        "--pairs", 300, "--seed", 3, *TINY_TRAIN, "--out", out,
    )
    assert code == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["ns"] for r in rows] == [None, 20, 40]


def test_eval_surrogate_sweep_rejects_even_nm(small_csv):
    assert run_cli("eval-surrogate", "--bench-file", small_csv, "--sweep-nm", "1,2", "--pairs", 10) == 1


TINY_SEARCH = ["--pop", 8, "--gens", 3, "--ns", 30, "--nm", 1, "--rounds", 2, "--epochs", 1, "--batch-size", 20]


def test_search_writes_report(tmp_path, full_table_csv):
    out = tmp_path / "report.json"
    code = run_cli(
        "search", "--bench-file", full_table_csv, *TINY_SEARCH,
        "--repeats", 2, "--seed", 11, "--out", out,
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert len(report["repeats"]) == 2
    assert report["repeats"][0]["seed"] == 11
    assert report["repeats"][1]["seed"] == 12
    assert report["true_evaluations"]["budget"] == 30 + 8
    assert all(n <= 38 for n in report["true_evaluations"]["per_repeat"])
    entry = report["repeats"][0]["front"][0]
    assert set(entry) == {"arch", "error", "train_error", "valid_error", "test_error", "params_mb", "flops_m"}
    assert report["stats"]["best_test_error_mean"] == pytest.approx(
        float(np.mean(report["stats"]["per_repeat_best_test_error"]))
    )


def test_search_report_front_matches_table(tmp_path, full_table_csv, full_table):
    from duelnas.bench import AccuracyField

    out = tmp_path / "report.json"
    assert run_cli("search", "--bench-file", full_table_csv, *TINY_SEARCH, "--repeats", 1, "--seed", 1, "--out", out) == 0
    report = json.loads(out.read_text())
    for entry in report["repeats"][0]["front"]:
        g = Genotype.from_text(entry["arch"])
        rec = full_table.record(g)
        assert entry["test_error"] == 100.0 - rec.test_acc
        assert entry["params_mb"] == rec.params_mb


def test_search_rejects_odd_population(full_table_csv):
    assert run_cli("search", "--bench-file", full_table_csv, "--pop", 51, "--gens", 1) == 1


def test_search_transfer_mode(tmp_path, full_table_csv):
    ens = tmp_path / "ens.bin"
    assert run_cli("train-surrogate", "--bench-file", full_table_csv, "--seed", 7, *TINY_TRAIN, "--out", ens) == 0
    out = tmp_path / "report.json"
    code = run_cli(
        "search", "--bench-file", full_table_csv, *TINY_SEARCH,
        "--repeats", 1, "--seed", 7, "--surrogate-from", ens, "--out", out,
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["true_evaluations"]["budget"] == 8
    assert all(n <= 8 for n in report["true_evaluations"]["per_repeat"])


def test_transfer_with_own_ensemble_matches_fresh_run(tmp_path, full_table_csv):
    # the saved ensemble for a seed is exactly what a fresh search trains,
    # so both routes must land on the same final front
    ens = tmp_path / "ens.bin"
    assert run_cli("train-surrogate", "--bench-file", full_table_csv, "--seed", 21, *TINY_TRAIN, "--out", ens) == 0
    fresh_out = tmp_path / "fresh.json"
    transfer_out = tmp_path / "transfer.json"
    assert run_cli("search", "--bench-file", full_table_csv, *TINY_SEARCH, "--repeats", 1, "--seed", 21, "--out", fresh_out) == 0
    assert run_cli(
        "search", "--bench-file", full_table_csv, *TINY_SEARCH,
        "--repeats", 1, "--seed", 21, "--surrogate-from", ens, "--out", transfer_out,
    ) == 0
    fresh = json.loads(fresh_out.read_text())
    transfer = json.loads(transfer_out.read_text())
    assert fresh["repeats"][0]["front"] == transfer["repeats"][0]["front"]


def test_unknown_command_is_usage_error():
    assert run_cli("frobnicate") == 1
