"""Command-line surface: train/evaluate the comparator, run searches, make data.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(missing or malformed input files), 3 runtime failure.  Every command is
deterministic given its flags and seed; the only volatile field in any
report is ``wall_clock_seconds``.

The ``DUELNAS_BENCH_DIR`` environment variable supplies a default
directory for benchmark CSV files given by bare name.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .bench import (
    AccuracyField,
    CountingTable,
    TableFormatError,
    global_pareto_front,
    load_table,
    synthetic_table,
    write_table,
)
from .evolve import RunConfig, run_search
from .metrics import evaluate_surrogate, run_stats
from .pairs import sample_architectures
from .surrogate import (
    Ensemble,
    EnsembleFormatError,
    TrainConfig,
    load_ensemble,
    save_ensemble,
    train_ensemble,
    untrained_ensemble,
)

BENCH_DIR_ENV = "DUELNAS_BENCH_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); usage errors are exit 1 here
        raise UsageError(message)


def _resolve_bench(path: str) -> str:
    if os.path.exists(path):
        return path
    env_dir = os.environ.get(BENCH_DIR_ENV)
    if env_dir:
        candidate = os.path.join(env_dir, path)
        if os.path.exists(candidate):
            return candidate
    raise FileNotFoundError(f"benchmark file not found: {path}")


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


def _model_stream(seed: int) -> np.random.Generator:
    # Same derivation as run_search, so a saved ensemble matches the one a
    # fresh search with this seed would train.
    return np.random.default_rng(seed).spawn(2)[0]


def _train_for_seed(table, ns, nm, field, hyper, rounds, seed):
    counting = CountingTable(table)
    model_rng = _model_stream(seed)
    ds = sample_architectures(counting, ns, field, model_rng)
    ensemble = train_ensemble(ds, nm, hyper, rounds, model_rng)
    return ds, ensemble, counting.true_evaluations


def _write_json(payload: dict, path: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv_rows(rows: list[tuple], header: tuple, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    os.replace(tmp, path)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ns", type=int, default=600, help="architectures evaluated to train the comparator")
    p.add_argument("--nm", type=int, default=7, help="ensemble size (odd)")
    p.add_argument("--rounds", type=int, default=100, help="pair-building rounds per block")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=100)


def _hyper(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, epochs=args.epochs)


def _field(args) -> AccuracyField:
    return AccuracyField.from_name(args.acc_field)


# --- commands -------------------------------------------------------------------


def cmd_train_surrogate(args) -> int:
    path = _resolve_bench(args.bench_file)
    table = load_table(path, args.dataset or os.path.splitext(os.path.basename(path))[0])
    ds, ensemble, evals = _train_for_seed(
        table, args.ns, args.nm, _field(args), _hyper(args), args.rounds, args.seed
    )
    if args.verbose:
        for i, blk in enumerate(ensemble.blocks):
            losses = " ".join(f"{v:.4f}" for v in blk.epoch_losses)
            print(f"block {i}: epoch losses {losses}")
    save_ensemble(ensemble, args.out)
    print(f"trained {ensemble.size} blocks on {len(ds)} architectures ({evals} true evaluations) -> {args.out}")
    return 0


def cmd_eval_surrogate(args) -> int:
    if args.pairs < 1:
        raise UsageError("--pairs must be >= 1")
    path = _resolve_bench(args.bench_file)
    table = load_table(path, args.dataset or os.path.splitext(os.path.basename(path))[0])
    field = _field(args)
    hyper = _hyper(args)
    eval_rng_seed = args.seed

    rows: list[dict] = []
    if args.sweep_nm:
        sizes = _parse_int_list(args.sweep_nm, "--sweep-nm")
        if any(v < 1 or v % 2 == 0 for v in sizes):
            raise UsageError("--sweep-nm values must be odd and >= 1")
        # Blocks trained from one spawned stream family: the first m blocks of
        # the largest run are exactly the blocks an nm=m run would train.
        ds, full, _ = _train_for_seed(table, args.ns, max(sizes), field, hyper, args.rounds, args.seed)
        excluded = [s.genotype for s in ds]
        for m in sizes:
            sub = Ensemble(blocks=full.blocks[:m])
            # fresh generator per row: every ensemble size sees the same pairs
            score = evaluate_surrogate(sub, table, excluded, args.pairs, field, _rng(eval_rng_seed, 0xE7A1))
            rows.append({"nm": m, "accuracy": score.accuracy, "f1": score.f1})
            print(f"nm={m:3d}  accuracy={score.accuracy:6.2f}  f1={score.f1:.4f}")
    elif args.sweep_ns:
        sizes = _parse_int_list(args.sweep_ns, "--sweep-ns")
        baseline = untrained_ensemble(args.nm, _rng(args.seed, 0xBA5E))
        score = evaluate_surrogate(baseline, table, [], args.pairs, field, _rng(eval_rng_seed, 0))
        rows.append({"ns": None, "accuracy": score.accuracy, "f1": score.f1})
        print(f"ns=none  accuracy={score.accuracy:6.2f}  f1={score.f1:.4f}")
        for ns in sizes:
            ds, ens, _ = _train_for_seed(table, ns, args.nm, field, hyper, args.rounds, args.seed)
            score = evaluate_surrogate(ens, table, [s.genotype for s in ds], args.pairs, field, _rng(eval_rng_seed, 0xE7A1))
            rows.append({"ns": ns, "accuracy": score.accuracy, "f1": score.f1})
            print(f"ns={ns:5d}  accuracy={score.accuracy:6.2f}  f1={score.f1:.4f}")
    else:
        if not args.ensemble:
            raise UsageError("--ensemble is required unless sweeping")
        ensemble = load_ensemble(args.ensemble)
        excluded = []
        if args.holdout_ns:
            holdout_seed = args.holdout_seed if args.holdout_seed is not None else args.seed
            model_rng = _model_stream(holdout_seed)
            excluded = [s.genotype for s in sample_architectures(table, args.holdout_ns, field, model_rng)]
        score = evaluate_surrogate(ensemble, table, excluded, args.pairs, field, _rng(eval_rng_seed, 1))
        c = score.confusion
        rows.append(
            {
                "accuracy": score.accuracy,
                "f1": score.f1,
                "tp": c.tp,
                "fp": c.fp,
                "tn": c.tn,
                "fn": c.fn,
            }
        )
        print(f"accuracy={score.accuracy:.2f} f1={score.f1:.4f} tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn}")

    if args.out:
        _write_json({"command": "eval-surrogate", "dataset": table.dataset_name, "rows": rows}, args.out)
    if args.csv_out:
        flat: list[tuple] = []
        for row in rows:
            prefix = ""
            if "nm" in row:
                prefix = f"nm={row['nm']}."
            elif "ns" in row:
                prefix = f"ns={row['ns']}."
            flat.extend((f"{prefix}{k}", v) for k, v in row.items() if k not in ("nm", "ns"))
        _write_csv_rows(flat, ("metric", "value"), args.csv_out)
    return 0


def cmd_search(args) -> int:
    started = time.perf_counter()
    path = _resolve_bench(args.bench_file)
    dataset = args.dataset or os.path.splitext(os.path.basename(path))[0]
    table = load_table(path, dataset)
    field = _field(args)
    hyper = _hyper(args)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")

    pretrained = load_ensemble(args.surrogate_from) if args.surrogate_from else None
    budget = args.pop if pretrained is not None else args.ns + args.pop

    repeats = []
    best_test_errors = []
    for r in range(args.repeats):
        cfg = RunConfig(
            pop_size=args.pop,
            generations=args.gens,
            crossover_rate=args.rc,
            mutation_rate=args.rm,
            ns=args.ns,
            nm=args.nm,
            rounds=args.rounds,
            seed=args.seed + r,
            dataset=dataset,
            accuracy_field=field,
        )
        result = run_search(cfg, table, pretrained=pretrained, hyper=hyper)
        if result.true_evaluations > budget:
            raise RuntimeError(
                f"true-evaluation budget exceeded: {result.true_evaluations} > {budget}"
            )
        entries = []
        for e in sorted(result.front, key=lambda e: e.genotype.ops):
            rec = e.record
            entries.append(
                {
                    "arch": e.genotype.to_text(),
                    "error": e.objectives.error,
                    "train_error": 100.0 - rec.train_acc,
                    "valid_error": 100.0 - rec.valid_acc,
                    "test_error": 100.0 - rec.test_acc,
                    "params_mb": rec.params_mb,
                    "flops_m": rec.flops_m,
                }
            )
        best = min(entry["test_error"] for entry in entries)
        best_test_errors.append(best)
        repeats.append(
            {
                "seed": cfg.seed,
                "true_evaluations": result.true_evaluations,
                "front": entries,
                "best_test_error": best,
            }
        )
        print(f"repeat {r}: {len(entries)} front members, best test error {best:.4f}, "
              f"{result.true_evaluations} true evaluations")

    stats = run_stats(best_test_errors)
    report = {
        "command": "search",
        "config": {
            "pop": args.pop,
            "gens": args.gens,
            "rc": args.rc,
            "rm": args.rm,
            "ns": args.ns,
            "nm": args.nm,
            "rounds": args.rounds,
            "epochs": args.epochs,
            "lr": args.lr,
            "batch_size": args.batch_size,
            "acc_field": field.value,
            "repeats": args.repeats,
            "seed": args.seed,
            "bench_file": args.bench_file,
            "surrogate_from": args.surrogate_from,
        },
        "dataset": dataset,
        "seed": args.seed,
        "repeats": repeats,
        "stats": {
            "best_test_error_mean": stats.mean,
            "best_test_error_std": stats.std,
            "per_repeat_best_test_error": list(stats.best_errors),
        },
        "true_evaluations": {
            "per_repeat": [rep["true_evaluations"] for rep in repeats],
            "budget": budget,
        },
        "wall_clock_seconds": time.perf_counter() - started,
    }
    if args.out:
        _write_json(report, args.out)
    print(f"best test error over {args.repeats} repeats: {stats.mean:.4f} +/- {stats.std:.4f}")
    return 0


def cmd_gen_synthetic(args) -> int:
    table = synthetic_table(args.seed, args.size_exponent)
    write_table(table, args.out)
    field = _field(args)
    front = global_pareto_front(table, field)
    front_out = args.front_out or args.out + ".front.csv"
    rows = []
    for g in front:
        rec = table.record(g)
        obj = table.objectives(g, field)
        rows.append((g.to_text(), repr(obj.error), repr(rec.params_mb), repr(rec.flops_m)))
    _write_csv_rows(rows, ("arch", "error", "params_mb", "flops_m"), front_out)
    print(f"wrote {len(table)} rows -> {args.out}; {len(front)} Pareto members -> {front_out}")
    return 0


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects a comma-separated integer list") from None
    if not values:
        raise UsageError(f"{flag} expects at least one value")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="duelnas", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train-surrogate", help="train and save a comparator ensemble")
    p.add_argument("--bench-file", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--acc-field", default="train", choices=("train", "valid", "test"))
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train_surrogate)

    p = sub.add_parser("eval-surrogate", help="score an ensemble; supports ablation sweeps")
    p.add_argument("--bench-file", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--ensemble", default=None, help="saved ensemble to evaluate")
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--acc-field", default="train", choices=("train", "valid", "test"))
    p.add_argument("--holdout-ns", type=int, default=0, help="exclude this many training architectures (reconstructed from the seed)")
    p.add_argument("--holdout-seed", type=int, default=None)
    p.add_argument("--sweep-nm", default=None, help="comma list of ensemble sizes to ablate")
    p.add_argument("--sweep-ns", default=None, help="comma list of sample sizes to ablate (adds an untrained baseline row)")
    _add_train_flags(p)
    p.add_argument("--out", default=None, help="JSON metrics file")
    p.add_argument("--csv-out", default=None, help="flat metric,value CSV")
    p.set_defaults(func=cmd_eval_surrogate)

    p = sub.add_parser("search", help="run repeated searches and write a report")
    p.add_argument("--bench-file", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--pop", type=int, default=50)
    p.add_argument("--gens", type=int, default=2000)
    p.add_argument("--rc", type=float, default=0.7)
    p.add_argument("--rm", type=float, default=0.1)
    p.add_argument("--acc-field", default="train", choices=("train", "valid", "test"))
    _add_train_flags(p)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--surrogate-from", default=None, help="reuse a saved ensemble (transfer mode; no training sample is evaluated)")
    p.add_argument("--out", default=None, help="JSON run report")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("gen-synthetic", help="write a synthetic benchmark table and its brute-forced Pareto set")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--front-out", default=None)
    p.add_argument("--size-exponent", type=int, default=6)
    p.add_argument("--acc-field", default="test", choices=("train", "valid", "test"))
    p.set_defaults(func=cmd_gen_synthetic)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TableFormatError, EnsembleFormatError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
