"""Command-line entry point: train, eval, score, advgen, stats.

Exit codes: 0 on success, 1 on runtime failure (one-line cause on stderr),
2 on usage errors. All randomness descends from the run seed through fixed
labels, so identical flags reproduce identical outputs; in 64-bit mode the
primary output files are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import adversarial, metrics
from .data import DatasetError, dataset_stats, load_dataset, save_dataset, subsample
from .model import ModelConfig, UrlClassifier, predict_probs
from .seeding import configure_threads, torch_generator
from .tokenizer import load_vocab, tokenize, train_bpe, vocab_sha256
from .training import (Checkpoint, CheckpointError, TrainConfig, load_checkpoint,
                       save_checkpoint, tokenize_set, train)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--url-col", default="url")
    parser.add_argument("--label-col", default="label")


def cmd_train(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set = load_dataset(args.data, url_col=args.url_col,
                             label_col=args.label_col)
    val_set = load_dataset(args.val, url_col=args.url_col,
                           label_col=args.label_col,
                           class_names=train_set.class_names)
    if args.subsample is not None:
        train_set = subsample(train_set, args.subsample, args.seed)

    vocab = train_bpe([r.url for r in train_set.records], args.vocab_size)
    model_config = ModelConfig(
        vocab_size=vocab.size, num_classes=train_set.num_classes,
        max_len=args.max_len, d_model=args.d_model, n_layers=args.layers,
        n_heads=args.heads, d_ff=args.d_ff, d_char=args.d_char,
        dropout=args.dropout)
    train_config = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        weight_decay=args.weight_decay, seed=args.seed,
        shuffle_seed=args.shuffle_seed, precision=args.precision)

    model = UrlClassifier(model_config, torch_generator(args.seed, "model-init"))
    result = train(model, train_set, val_set, vocab, train_config)

    label_map = {name: i for i, name in enumerate(train_set.class_names)}
    save_checkpoint(str(out_dir / "model.ckpt"), model,
                    train_config=train_config, label_map=label_map,
                    vocab=vocab, best_val_loss=result.best_val_loss,
                    best_epoch=result.best_epoch)
    _write_json(out_dir / "log.json", {
        "epochs": [e.to_dict() for e in result.log],
        "best_val_loss": result.best_val_loss,
        "best_epoch": result.best_epoch,
    })
    _write_json(out_dir / "config.json", {
        "model_config": model_config.to_dict(),
        "train_config": train_config.to_dict(),
        "label_map": label_map,
        "vocab_sha256": vocab_sha256(vocab),
    })
    print(f"best val loss {result.best_val_loss:.6f} at epoch "
          f"{result.best_epoch}; wrote {out_dir / 'model.ckpt'}")
    return 0


def _class_names_from(ckpt: Checkpoint) -> tuple[str, ...]:
    by_id = sorted(ckpt.label_map.items(), key=lambda kv: kv[1])
    return tuple(name for name, _ in by_id)


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.ckpt)
    if args.vocab is not None:
        supplied = load_vocab(args.vocab)
        if vocab_sha256(supplied) != ckpt.vocab_digest:
            raise CheckpointError(
                "vocabulary hash mismatch between checkpoint and --vocab file")
    model = ckpt.build_model()
    names = _class_names_from(ckpt)
    test_set = load_dataset(args.test, url_col=args.url_col,
                            label_col=args.label_col, class_names=names)
    seqs, labels = tokenize_set(test_set, ckpt.vocab, model.config.max_len)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    targets = tuple(args.tpr_at)
    tag = "cross" if args.cross else None

    if args.ablate is not None:
        rows = metrics.layer_ablation(model, seqs, labels, args.ablate,
                                      fpr_targets=targets,
                                      batch_size=args.batch_size)
        _write_json(out_dir / "ablation.json",
                    [{"layers": k, "report": rep.to_json_dict()}
                     for k, rep in rows])
        (out_dir / "ablation.txt").write_text(
            metrics.ablation_text(rows) + "\n", encoding="utf-8")
        print(metrics.ablation_text(rows))
        return 0

    probs = predict_probs(model, seqs, batch_size=args.batch_size)
    report = metrics.evaluate_scores(probs, labels, fpr_targets=targets, tag=tag)
    _write_json(out_dir / "report.json", report.to_json_dict())
    (out_dir / "report.txt").write_text(report.to_text() + "\n",
                                        encoding="utf-8")
    print(report.to_text())
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.ckpt)
    model = ckpt.build_model()
    names = _class_names_from(ckpt)
    if args.infile is not None:
        lines = Path(args.infile).read_text(encoding="utf-8").splitlines()
    else:
        lines = sys.stdin.read().splitlines()
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        if lines:
            seqs = [tokenize(u, ckpt.vocab, max_len=model.config.max_len)
                    for u in lines]
            probs = predict_probs(model, seqs, batch_size=args.batch_size)
            for url, row in zip(lines, probs):
                pred = int(np.argmax(row))
                score = row[1] if len(names) == 2 else row[pred]
                out.write(f"{score:.6f}\t{names[pred]}\t{url}\n")
    finally:
        if args.out:
            out.close()
    return 0


def cmd_advgen(args: argparse.Namespace) -> int:
    dset = load_dataset(args.infile, url_col=args.url_col,
                        label_col=args.label_col)
    benign_pool = [r.url for r in dset.records if r.label == 0]
    malicious_pool = [r.url for r in dset.records if r.label == 1]
    counts = args.spec
    if len(counts) != 3:
        raise DatasetError("--spec needs exactly three counts: benign,"
                           "malicious,adversarial")
    spec = adversarial.AdvTestSpec(benign_count=counts[0],
                                   malicious_count=counts[1],
                                   adversarial_count=counts[2],
                                   seed=args.seed)
    cfg = adversarial.AttackConfig(
        malicious_domains=adversarial.load_domain_list(args.domains),
        hyphen_probability=args.prob, seed=args.seed)
    result, skipped = adversarial.build_advtest(benign_pool, malicious_pool,
                                                spec, cfg)
    if args.out:
        save_dataset(result, args.out)
        print(f"wrote {len(result)} records to {args.out} "
              f"({skipped} host-less skips)")
    else:
        sys.stdout.write("url,label\n")
        writer = csv.writer(sys.stdout, lineterminator="\n")
        for record in result.records:
            writer.writerow([record.url, record.label])
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    dset = load_dataset(args.infile, url_col=args.url_col,
                        label_col=args.label_col)
    stats = dataset_stats(dset)
    payload = json.dumps(stats.to_json_dict(), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urldet",
        description="Malicious URL detector: train, evaluate, score.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from CSV/TSV data")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--val", required=True)
    p_train.add_argument("--out", required=True)
    _add_dataset_flags(p_train)
    p_train.add_argument("--vocab-size", type=int, default=500)
    p_train.add_argument("--max-len", type=int, default=200)
    p_train.add_argument("--d-model", type=int, default=64)
    p_train.add_argument("--layers", type=int, default=4)
    p_train.add_argument("--heads", type=int, default=4)
    p_train.add_argument("--d-ff", type=int, default=256)
    p_train.add_argument("--d-char", type=int, default=16)
    p_train.add_argument("--dropout", type=float, default=0.1)
    p_train.add_argument("--epochs", type=int, default=5)
    p_train.add_argument("--batch-size", type=int, default=64)
    p_train.add_argument("--lr", type=float, default=2e-5)
    p_train.add_argument("--weight-decay", type=float, default=1e-4)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--shuffle-seed", type=int, default=None)
    p_train.add_argument("--subsample", type=float, default=None)
    p_train.add_argument("--precision", type=int, choices=(32, 64), default=32)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a test set")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--test", required=True)
    p_eval.add_argument("--out", default=".")
    _add_dataset_flags(p_eval)
    p_eval.add_argument("--vocab", default=None,
                        help="external vocabulary file to verify against")
    p_eval.add_argument("--cross", action="store_true",
                        help="tag the report as a cross-dataset run")
    p_eval.add_argument("--ablate", type=_parse_int_list, default=None,
                        help="comma-separated layer counts to evaluate")
    p_eval.add_argument("--tpr-at", type=_parse_float_list,
                        default=list(metrics.DEFAULT_FPR_TARGETS))
    p_eval.add_argument("--batch-size", type=int, default=64)
    p_eval.set_defaults(func=cmd_eval)

    p_score = sub.add_parser("score", help="score URLs, one per line")
    p_score.add_argument("--ckpt", required=True)
    p_score.add_argument("--in", dest="infile", default=None)
    p_score.add_argument("--out", default=None)
    p_score.add_argument("--batch-size", type=int, default=64)
    p_score.set_defaults(func=cmd_score)

    p_adv = sub.add_parser("advgen", help="build an adversarial test set")
    p_adv.add_argument("--in", dest="infile", required=True)
    p_adv.add_argument("--domains", required=True)
    p_adv.add_argument("--spec", type=_parse_int_list, required=True,
                       help="benign,malicious,adversarial counts")
    p_adv.add_argument("--seed", type=int, default=0)
    p_adv.add_argument("--prob", type=float, default=0.5)
    p_adv.add_argument("--out", default=None)
    _add_dataset_flags(p_adv)
    p_adv.set_defaults(func=cmd_advgen)

    p_stats = sub.add_parser("stats", help="summarize a dataset")
    p_stats.add_argument("--in", dest="infile", required=True)
    p_stats.add_argument("--out", default=None)
    _add_dataset_flags(p_stats)
    p_stats.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    configure_threads()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
