"""Command-line entry point.

Subcommands: gen-data, train, eval, judge, rerank, bench, e2e. Every run
writes a resolved-config copy next to its outputs. Exit codes: 0 ok,
1 usage, 2 data error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import statistics
import sys
import time
from pathlib import Path

import torch

from . import judge as judge_mod
from . import metrics as metrics_mod
from . import rankexpr
from .model import (
    CausalTransformer,
    CheckpointError,
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
)
from .template import Requirement, assemble, assemble_sample
from .train import TrainConfig, TrainingDiverged, evaluate_accuracy, split_dataset, train_epochs
from .vocab import Vocabulary, VocabError, build_vocabulary
from .world import (
    WorldConfig,
    WorldError,
    generate_dependency_set,
    generate_pair_set,
    generate_training_set,
    read_pairs,
    read_samples,
    write_jsonl,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3


class DataError(RuntimeError):
    pass


def _load_json(path) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read config {path}: {e}") from e


def _world_config(args) -> WorldConfig:
    if getattr(args, "world_config", None):
        raw = _load_json(args.world_config)
        raw = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
        try:
            return WorldConfig(**raw)
        except TypeError as e:
            raise DataError(f"bad world config: {e}") from e
    return WorldConfig()


def _write_resolved_config(out_path: Path, payload: dict) -> None:
    cfg_path = out_path.with_name(out_path.name + ".config.json")
    with open(cfg_path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)


def _load_vocab(path) -> Vocabulary:
    try:
        return Vocabulary.load(path)
    except (OSError, VocabError, json.JSONDecodeError, KeyError) as e:
        raise DataError(f"cannot load vocabulary {path}: {e}") from e


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_data(args) -> int:
    cfg = _world_config(args)
    if args.vocab:
        build_vocabulary(cfg).save(args.vocab)
    if args.kind == "train":
        records = generate_training_set(cfg, args.n, args.seed)
    elif args.kind == "dependency":
        records = generate_dependency_set(
            cfg, args.n, args.seed, dep_fraction=args.dep_fraction
        )
    else:
        records = generate_pair_set(cfg, args.n, args.seed)
    n = write_jsonl(args.out, records)
    _write_resolved_config(
        Path(args.out),
        {
            "subcommand": "gen-data",
            "kind": args.kind,
            "n": args.n,
            "seed": args.seed,
            "world": dataclasses.asdict(cfg),
        },
    )
    print(f"wrote {n} records to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    raw = _load_json(args.config) if args.config else {}
    model_raw = raw.pop("model", {})
    try:
        train_cfg = TrainConfig(**raw)
    except TypeError as e:
        raise DataError(f"bad train config: {e}") from e
    vocab = _load_vocab(args.vocab)
    try:
        samples = read_samples(args.data)
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise DataError(f"cannot read dataset {args.data}: {e}") from e
    if not samples:
        raise DataError("empty dataset")
    model_raw.setdefault("vocab_size", vocab.size)
    model_raw.setdefault("seed", train_cfg.seed)
    model_cfg = ModelConfig(**model_raw)
    model = CausalTransformer(model_cfg)
    train_split, val_split = split_dataset(samples, seed=train_cfg.seed)
    history = train_epochs(
        train_split, model, train_cfg, vocab, val_samples=val_split, quiet=args.quiet
    )
    save_checkpoint(args.out, model, vocab)
    history.write_csv(Path(args.out).with_suffix(".metrics.csv"))
    _write_resolved_config(
        Path(args.out),
        {
            "subcommand": "train",
            "train": dataclasses.asdict(train_cfg),
            "model": dataclasses.asdict(model_cfg),
            "data": str(args.data),
            "n_train": len(train_split),
            "n_val": len(val_split),
        },
    )
    if val_split:
        report = evaluate_accuracy(model, val_split, vocab)
        print(
            f"validation acc_property={report.acc_property:.4f} "
            f"acc_sample={report.acc_sample:.4f}"
        )
    return EXIT_OK


def cmd_eval(args) -> int:
    vocab = _load_vocab(args.vocab)
    model = load_checkpoint(args.ckpt, vocab)
    samples = read_samples(args.data)
    if not samples:
        raise DataError("empty dataset")
    start = time.perf_counter()
    report = evaluate_accuracy(model, samples, vocab)
    report.samples_per_second = len(samples) / (time.perf_counter() - start)
    report.forward_passes_per_sample = 1.0
    out = Path(args.out)
    with open(out, "w") as f:
        f.write(report.to_json())
        f.write("\n")
    with open(out.with_suffix(".positions.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["position", "accuracy"])
        for i, acc in enumerate(report.per_position_accuracy, start=1):
            w.writerow([i, acc])
    _write_resolved_config(
        out, {"subcommand": "eval", "ckpt": str(args.ckpt), "data": str(args.data)}
    )
    print(report.to_json())
    return EXIT_OK


def cmd_judge(args) -> int:
    vocab = _load_vocab(args.vocab)
    model = load_checkpoint(args.ckpt, vocab)
    samples = read_samples(args.input)
    with open(args.out, "w") as f:
        for s in samples:
            t = assemble_sample(s, vocab, with_reasons=False, labeled=False)
            if args.mode == "single":
                js = judge_mod.judge_single_pass(model, t, vocab)
            elif args.mode == "auto":
                js = judge_mod.judge_autoregressive_baseline(model, t, vocab)
            else:
                reqs = [Requirement(text=p.text) for p in s.properties]
                scene_tokens = vocab.encode(s.scene.to_words())
                js = judge_mod.judge_isolated_baseline(model, reqs, scene_tokens, vocab)
            f.write(
                json.dumps(
                    {
                        "decisions": js.decisions,
                        "p_yes": [round(p, 6) for p in js.p_yes],
                        "passes": js.n_forward_passes,
                        "wall_ms": js.wall_time_s * 1e3,
                    }
                )
            )
            f.write("\n")
    _write_resolved_config(
        Path(args.out),
        {"subcommand": "judge", "mode": args.mode, "ckpt": str(args.ckpt)},
    )
    return EXIT_OK


def cmd_rerank(args) -> int:
    vocab = _load_vocab(args.vocab)
    model = load_checkpoint(args.ckpt, vocab)
    pairs = read_pairs(args.pairs)
    if not pairs:
        raise DataError("no pairs")
    predictions, labels = [], []
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["pair", "score_1", "score_2", "prediction", "label", "tie"])
        for i, pair in enumerate(pairs):
            res = rankexpr.rerank_pair(model, pair, vocab)
            predictions.append(res.prediction)
            labels.append(pair.label)
            w.writerow([i, res.score_1, res.score_2, res.prediction, pair.label, res.tie])
    err = metrics_mod.compute_error_rank(predictions, labels)
    _write_resolved_config(
        Path(args.out),
        {"subcommand": "rerank", "ckpt": str(args.ckpt), "error_rank": err},
    )
    print(f"error_rank={err:.4f} over {len(pairs)} pairs")
    return EXIT_OK


def bench_rows(
    model: CausalTransformer,
    vocab: Vocabulary,
    world_cfg: WorldConfig,
    n_requirements_list,
    repeats: int,
    seed: int = 0,
) -> list[dict]:
    """Single-pass vs autoregressive vs isolated wall-clock and pass counts."""
    rows = []
    for n_req in n_requirements_list:
        cfg = dataclasses.replace(
            world_cfg, properties_low=n_req, properties_high=n_req
        )
        sample = next(generate_training_set(cfg, 1, seed))
        t = assemble_sample(sample, vocab, with_reasons=False, labeled=False)
        reqs = [Requirement(text=p.text) for p in sample.properties]
        scene_tokens = vocab.encode(sample.scene.to_words())
        timings = {"single": [], "auto": [], "isolated": []}
        passes = {}
        # warmup
        judge_mod.judge_single_pass(model, t, vocab)
        judge_mod.judge_autoregressive_baseline(model, t, vocab)
        for _ in range(repeats):
            js = judge_mod.judge_single_pass(model, t, vocab)
            timings["single"].append(js.wall_time_s)
            passes["single"] = js.n_forward_passes
            js = judge_mod.judge_autoregressive_baseline(model, t, vocab)
            timings["auto"].append(js.wall_time_s)
            passes["auto"] = js.n_forward_passes
            js = judge_mod.judge_isolated_baseline(model, reqs, scene_tokens, vocab)
            timings["isolated"].append(js.wall_time_s)
            passes["isolated"] = js.n_forward_passes
        row = {"n_requirements": n_req}
        for mode in ("single", "auto", "isolated"):
            row[f"{mode}_passes"] = passes[mode]
            row[f"{mode}_ms_mean"] = statistics.mean(timings[mode]) * 1e3
            row[f"{mode}_ms_stdev"] = (
                statistics.stdev(timings[mode]) * 1e3 if repeats > 1 else 0.0
            )
            row[f"{mode}_ms_median"] = statistics.median(timings[mode]) * 1e3
        row["speedup_vs_auto"] = row["auto_ms_median"] / row["single_ms_median"]
        rows.append(row)
    return rows


def cmd_bench(args) -> int:
    vocab = _load_vocab(args.vocab)
    model = load_checkpoint(args.ckpt, vocab)
    n_list = [int(x) for x in args.n_requirements.split(",")]
    rows = bench_rows(model, vocab, _world_config(args), n_list, args.repeats)
    with open(args.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    header = f"{'N':>4} {'single':>12} {'auto':>12} {'isolated':>12} {'speedup':>8}"
    print(header)
    for r in rows:
        print(
            f"{r['n_requirements']:>4} "
            f"{r['single_ms_median']:>10.2f}ms "
            f"{r['auto_ms_median']:>10.2f}ms "
            f"{r['isolated_ms_median']:>10.2f}ms "
            f"{r['speedup_vs_auto']:>7.2f}x"
        )
    _write_resolved_config(
        Path(args.out),
        {"subcommand": "bench", "n_requirements": n_list, "repeats": args.repeats},
    )
    return EXIT_OK


def cmd_e2e(args) -> int:
    """Smoke pipeline: gen-data -> train (small) -> eval -> rerank -> bench."""
    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(max(1, args.threads))
    cfg = WorldConfig()
    vocab = build_vocabulary(cfg)
    vocab.save(workdir / "vocab.json")

    samples = list(generate_training_set(cfg, args.n_samples, args.seed))
    write_jsonl(workdir / "train.jsonl", samples)
    train_cfg = TrainConfig(
        learning_rate=3e-4, batch_size=16, epochs=args.epochs, seed=args.seed,
        eval_interval=10_000,
    )
    model_cfg = ModelConfig(
        d_model=64, n_layers=2, n_heads=4, d_ff=256, vocab_size=vocab.size,
        seed=args.seed,
    )
    model = CausalTransformer(model_cfg)
    train_split, val_split = split_dataset(samples, seed=args.seed)
    train_epochs(train_split, model, train_cfg, vocab, val_samples=None)
    save_checkpoint(workdir / "model.ckpt", model, vocab)

    report = evaluate_accuracy(model, val_split, vocab)
    with open(workdir / "report.json", "w") as f:
        f.write(report.to_json())

    pairs = list(generate_pair_set(cfg, 50, args.seed + 1))
    preds = [rankexpr.rerank_pair(model, p, vocab).prediction for p in pairs]
    err = metrics_mod.compute_error_rank(preds, [p.label for p in pairs])

    rows = bench_rows(model, vocab, cfg, [2, 10], repeats=3, seed=args.seed)
    _write_resolved_config(
        workdir / "e2e",
        {
            "subcommand": "e2e",
            "seed": args.seed,
            "n_samples": args.n_samples,
            "acc_property": report.acc_property,
            "acc_sample": report.acc_sample,
            "error_rank": err,
            "speedup_n10": rows[-1]["speedup_vs_auto"],
        },
    )
    print(
        f"acc_property={report.acc_property:.4f} acc_sample={report.acc_sample:.4f} "
        f"error_rank={err:.4f} speedup@10={rows[-1]['speedup_vs_auto']:.2f}x"
    )
    if report.acc_sample > report.acc_property + 1e-12:
        print("invariant violation: acc_sample > acc_property", file=sys.stderr)
        return EXIT_INVARIANT
    if rows[-1]["single_passes"] != 1 or rows[-1]["auto_passes"] < 10:
        print("invariant violation: forward pass counts", file=sys.stderr)
        return EXIT_INVARIANT
    if args.check_accuracy and report.acc_property <= 0.6:
        print("smoke training failed to beat chance", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slotjudge")
    sub = p.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("gen-data", help="generate synthetic datasets")
    g.add_argument("--kind", choices=["train", "pairs", "dependency"], required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--vocab", help="also write the vocabulary file here")
    g.add_argument("--world-config", help="JSON file of world fields")
    g.add_argument("--dep-fraction", type=float, default=0.5)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--data", required=True)
    t.add_argument("--config", help="flat JSON of training fields")
    t.add_argument("--vocab", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate accuracies on a labeled set")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--vocab", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    j = sub.add_parser("judge", help="run an inference engine over samples")
    j.add_argument("--ckpt", required=True)
    j.add_argument("--input", required=True)
    j.add_argument("--mode", choices=["single", "auto", "isolated"], default="single")
    j.add_argument("--vocab", required=True)
    j.add_argument("--out", required=True)
    j.set_defaults(func=cmd_judge)

    r = sub.add_parser("rerank", help="pairwise reranking over a pair file")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--pairs", required=True)
    r.add_argument("--vocab", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rerank)

    b = sub.add_parser("bench", help="single-pass vs baselines throughput")
    b.add_argument("--ckpt", required=True)
    b.add_argument("--vocab", required=True)
    b.add_argument("--n-requirements", default="2,5,10,20")
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--out", required=True)
    b.add_argument("--world-config")
    b.set_defaults(func=cmd_bench)

    z = sub.add_parser("e2e", help="end-to-end smoke run")
    z.add_argument("--seed", type=int, default=0)
    z.add_argument("--workdir", required=True)
    z.add_argument("--n-samples", type=int, default=600)
    z.add_argument("--epochs", type=int, default=2)
    z.add_argument("--threads", type=int, default=1)
    z.add_argument("--check-accuracy", action="store_true")
    z.set_defaults(func=cmd_e2e)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return EXIT_USAGE
    try:
        return args.func(args)
    except (DataError, CheckpointError, WorldError, VocabError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (AssertionError, TrainingDiverged) as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
