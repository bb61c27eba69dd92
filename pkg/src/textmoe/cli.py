"""Command-line surface: train, eval, predict, ablate, ratio-sweep, init.

Every command is driven by an INI config (see config.py); flags override
file values. Config and usage errors exit 2, data/parse/runtime errors
exit 1, success exits 0. The default output directory comes from --out,
then [output] dir, then $TEXTMOE_OUTPUT_DIR, then ./textmoe_out.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from .ablation import ALL_VARIANTS, DataBundle, build_model, ratio_sweep, run_ablation
from .checkpoint import load_checkpoint, save_checkpoint
from .config import (
    RunConfig,
    load_run_config,
    parse_ratio,
    resolve_output_dir,
    write_run_config,
)
from .data import (
    DEPRESSION,
    SENTIMENT,
    TASK_IDS,
    build_vocab,
    dataset_rows,
    encode_text,
    load_csv_dataset,
    synth_generate,
    tokenize,
    write_csv,
)
from .errors import ConfigError, DataError, Error, UsageError
from .lexicon import DEFAULT_MARKER_EMOTIONS, load_nrc_lexicon, load_plain_lexicon
from .metrics import evaluate, metrics_table, report_record
from .tensor import softmax
from .train import fit

CONFIG_EXIT = 2
ERROR_EXIT = 1


def _load_lexicon(cfg: RunConfig):
    if cfg.lexicon_format == "nrc":
        emotions = cfg.nrc_emotions or DEFAULT_MARKER_EMOTIONS
        return load_nrc_lexicon(cfg.lexicon_path, emotions, cfg.language)
    return load_plain_lexicon(cfg.lexicon_path, cfg.language)


def _read_token_lists(path: str, cfg: RunConfig) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if cfg.text_column not in (reader.fieldnames or []):
            raise DataError(f"{path}: missing column {cfg.text_column!r}")
        return [tokenize(row[cfg.text_column], cfg.language) for row in reader]


def load_bundle(cfg: RunConfig) -> DataBundle:
    """Lexicon + vocabulary + datasets as configured."""
    lexicon = _load_lexicon(cfg)
    corpora = []
    if cfg.sentiment_csv:
        corpora += _read_token_lists(cfg.sentiment_csv, cfg)
    corpora += _read_token_lists(cfg.depression_csv, cfg)
    vocab = build_vocab(corpora, cfg.min_count)

    def load(path: str, task_id: str):
        return load_csv_dataset(path, task_id, cfg.text_column, cfg.label_column,
                                cfg.label_map, lexicon, vocab, cfg.language,
                                cfg.max_seq_len)

    return DataBundle(
        sentiment=load(cfg.sentiment_csv, SENTIMENT) if cfg.sentiment_csv else None,
        depression=load(cfg.depression_csv, DEPRESSION),
        vocab=vocab,
        lexicon=lexicon,
        depression_test=(load(cfg.depression_test_csv, DEPRESSION)
                         if cfg.depression_test_csv else None),
        embeddings_path=cfg.embeddings_path or None,
    )


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> None:
    for attr in ("seed", "max_epochs", "batch_size", "learning_rate"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "ratio", None) is not None:
        cfg.ratio = parse_ratio(args.ratio)
    cfg.validate()


def _label_names(cfg: RunConfig) -> dict[str, list[str]]:
    return {task: cfg.label_names for task in TASK_IDS}


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    _apply_overrides(cfg, args)
    out_dir = resolve_output_dir(args.out, cfg)
    os.makedirs(out_dir, exist_ok=True)

    bundle = load_bundle(cfg)
    model = build_model(bundle, cfg.model_config(len(bundle.vocab)), cfg.seed)
    report = fit(model, bundle.sentiment, bundle.depression, cfg.train_config(),
                 on_epoch=lambda r: print(r.log_line()))

    ckpt_path = save_checkpoint(os.path.join(out_dir, "model.npz"), model,
                                bundle.vocab, bundle.lexicon, _label_names(cfg),
                                cfg.language, cfg.text_column, cfg.label_column)
    with open(os.path.join(out_dir, "train_log.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(report.log_lines()) + "\n")
    final = evaluate(model, bundle.eval_set, DEPRESSION, cfg.batch_size)
    record = report_record(final)
    with open(os.path.join(out_dir, "metrics.txt"), "w", encoding="utf-8") as fh:
        fh.write(record)
    print(record, end="")
    print(f"checkpoint: {ckpt_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if args.task not in ckpt.label_names:
        raise ConfigError(f"task {args.task!r} not in checkpoint "
                          f"(has: {sorted(ckpt.label_names)})")
    label_map = {name: i for i, name in enumerate(ckpt.label_names[args.task])}
    dataset = load_csv_dataset(
        args.dataset, args.task,
        args.text_column or ckpt.text_column,
        args.label_column or ckpt.label_column,
        label_map, ckpt.lexicon, ckpt.vocab, ckpt.language,
        ckpt.model.cfg.max_seq_len,
    )
    report = evaluate(ckpt.model, dataset, args.task)
    print(report_record(report), end="")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if args.task not in ckpt.label_names:
        raise ConfigError(f"task {args.task!r} not in checkpoint "
                          f"(has: {sorted(ckpt.label_names)})")
    names = ckpt.label_names[args.task]
    lines = [line.rstrip("\n") for line in sys.stdin]
    if not lines:
        return 0
    batch = [encode_text(line, ckpt.vocab, ckpt.lexicon, ckpt.language,
                         ckpt.model.cfg.max_seq_len) for line in lines]
    logits = ckpt.model.forward(batch, args.task, training=False)
    probs = softmax(logits).data
    for row in probs:
        best = int(np.argmax(row))
        print(f"{names[best]}\t{row[best]:.6f}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    _apply_overrides(cfg, args)
    out_dir = resolve_output_dir(args.out, cfg)
    os.makedirs(out_dir, exist_ok=True)

    bundle = load_bundle(cfg)
    model_cfg = cfg.model_config(len(bundle.vocab))
    rows = []
    for variant in ALL_VARIANTS:
        report = run_ablation(variant, bundle, model_cfg, cfg.train_config())
        rows.append((variant.value, report))
    table = metrics_table(rows, label="variant")
    with open(os.path.join(out_dir, "ablation.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")
    return 0


def cmd_ratio_sweep(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    _apply_overrides(cfg, args)
    out_dir = resolve_output_dir(args.out, cfg)
    os.makedirs(out_dir, exist_ok=True)

    ratios = [parse_ratio(r) for r in args.ratios.split(",") if r.strip()]
    if not ratios:
        raise ConfigError("no ratios given")
    bundle = load_bundle(cfg)
    results = ratio_sweep(ratios, bundle, cfg.model_config(len(bundle.vocab)),
                          cfg.train_config())
    rows = [(f"{rs}:{rd}", report) for (rs, rd), report in results]
    table = metrics_table(rows, label="ratio")
    plot_lines = []
    for (rs, rd), report in results:
        x = rs / rd if rd else math.inf
        plot_lines.append(f"{x:g} {report.macro_f1!r}")
    with open(os.path.join(out_dir, "ratio_sweep.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    with open(os.path.join(out_dir, "ratio_sweep.dat"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(plot_lines) + "\n")
    print(table, end="")
    return 0


def cmd_init(args: argparse.Namespace) -> int:
    """Scaffold a self-contained synthetic quick-start into a directory."""
    out = args.outdir
    os.makedirs(out, exist_ok=True)
    synth = synth_generate(args.seed, args.n_per_task, args.vocab_size,
                           args.signal, n_test_per_task=max(50, args.n_per_task // 4))
    write_csv(os.path.join(out, "sentiment.csv"),
              dataset_rows(synth.sentiment, synth.vocab))
    write_csv(os.path.join(out, "depression.csv"),
              dataset_rows(synth.depression, synth.vocab))
    write_csv(os.path.join(out, "depression_test.csv"),
              dataset_rows(synth.depression_test, synth.vocab))
    with open(os.path.join(out, "lexicon.txt"), "w", encoding="utf-8") as fh:
        fh.write("# negative-marker terms, one per line\n")
        fh.write("\n".join(sorted(synth.lexicon.terms)) + "\n")

    word_dim = 24
    rng = np.random.default_rng([args.seed, 99])
    with open(os.path.join(out, "embeddings.txt"), "w", encoding="utf-8") as fh:
        for token in synth.vocab.id_to_token[2:]:
            if rng.random() < 0.7:  # leave some tokens to the OOV path
                values = " ".join(f"{v:.5f}" for v in rng.uniform(-0.5, 0.5, word_dim))
                fh.write(f"{token} {values}\n")

    cfg = RunConfig(
        word_dim=word_dim, marker_dim=8, num_heads=2, ff1_dim=32,
        ff2_hidden=16, ff2_out=16, num_experts=2, dropout=0.1,
        learning_rate=1e-3, batch_size=32, max_epochs=6, ratio=(1, 1),
        seed=args.seed,
        sentiment_csv="sentiment.csv", depression_csv="depression.csv",
        depression_test_csv="depression_test.csv", lexicon_path="lexicon.txt",
        embeddings_path="embeddings.txt", output_dir="run",
    )
    config_path = os.path.join(out, "config.ini")
    write_run_config(cfg, config_path)
    print(f"wrote quick-start into {out}")
    print(f"next: textmoe train {config_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textmoe",
        description="Multi-task text classifier with lexicon markers, "
                    "shared attention experts, and per-task gates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("config", help="INI config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
        p.add_argument("--ratio", default=None, help="sentiment:depression, e.g. 3:1")

    p = sub.add_parser("train", help="train a model and write checkpoint/log/metrics")
    add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a CSV dataset")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--task", default=DEPRESSION, choices=list(TASK_IDS))
    p.add_argument("--text-column", dest="text_column", default=None)
    p.add_argument("--label-column", dest="label_column", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="label stdin lines as label<TAB>probability")
    p.add_argument("checkpoint")
    p.add_argument("--task", default=DEPRESSION, choices=list(TASK_IDS))
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="run the four ablation variants")
    add_run_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("ratio-sweep", help="train once per sentiment:depression ratio")
    add_run_flags(p)
    p.add_argument("--ratios", default="0:1,1:1,3:1",
                   help="comma-separated list, e.g. 0:1,1:1,3:1,5:1")
    p.set_defaults(func=cmd_ratio_sweep)

    p = sub.add_parser("init", help="write a synthetic quick-start (data + config)")
    p.add_argument("outdir")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--n-per-task", dest="n_per_task", type=int, default=400)
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=120)
    p.add_argument("--signal", type=float, default=0.9)
    p.set_defaults(func=cmd_init)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return CONFIG_EXIT
    except (Error, OSError, UnicodeDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return ERROR_EXIT


if __name__ == "__main__":
    sys.exit(main())
