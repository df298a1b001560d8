"""Command-line entry point: prepare, train, evaluate, verify.

Exit codes: 0 success, 1 check or training failure, 2 usage or input error.
A flat ``key = value`` config file can set any run, training, or
hyperparameter key; command-line flags override file values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, selfcheck
from .data import (EXPECTED_SPLIT_SIZES, EncodedDataset, ParseError,
                   build_vocab, encode_record, parse_tsv)
from .embeddings import (EmbeddingFormatError, build_embedding_matrix, coverage,
                         load_word_vectors)
from .figures import save_confusion_heatmap, save_training_curves
from .models import (ARCHITECTURES, CheckpointError, HyperParams, build_model,
                     load_checkpoint, predict_batch, save_checkpoint)
from .optim import TrainConfig, TrainingDivergedError, train, train_log_lines
from .report import confusion, format_confusion, metrics, render_json, render_text
from .tensor import ShapeError

SPLITS = ("train", "valid", "test")

_HYPER_KEYS = {f.name for f in dataclasses.fields(HyperParams)}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
_RUN_KEYS = {"model", "data_dir", "out", "embeddings", "min_count", "split", "checkpoint"}
_BOOL_KEYS = {"shuffle", "trainable_embeddings"}


class UsageError(ValueError):
    """Bad flags, config values, or missing inputs."""


def load_config_file(path):
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    path = Path(path)
    values = {}
    known = _HYPER_KEYS | _TRAIN_KEYS | _RUN_KEYS
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value
    return values


def _coerce(key, value):
    if isinstance(value, str):
        if key in _BOOL_KEYS:
            lowered = value.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")
        if key == "patience":
            if value.lower() in ("none", ""):
                return None
            return int(value)
        if key in ("rho", "epsilon", "dropout"):
            return float(value)
        if key in _HYPER_KEYS or key in ("batch_size", "epochs", "seed", "min_count"):
            return int(value)
    return value


def _settings(args):
    """Config-file values overridden by any flag the user actually passed."""
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    values = {k: _coerce(k, v) for k, v in values.items()}
    for key in _RUN_KEYS | _TRAIN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _hyper(settings):
    kwargs = {k: _coerce(k, v) for k, v in settings.items() if k in _HYPER_KEYS}
    return HyperParams(**kwargs)


def _train_config(settings):
    kwargs = {k: settings[k] for k in _TRAIN_KEYS if k in settings}
    return TrainConfig(**kwargs)


def _require(settings, key, flag):
    if key not in settings or settings[key] is None:
        raise UsageError(f"missing required setting {key!r} (flag {flag})")
    return settings[key]


def _cache_paths(cache_dir):
    cache_dir = Path(cache_dir)
    meta_path = cache_dir / "meta.json"
    if not meta_path.exists():
        raise UsageError(f"no prepared cache at {cache_dir} (missing {meta_path}); "
                         "run 'liarnet prepare' first")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format") != "liar-cache" or meta.get("version") != 1:
        raise UsageError(f"{meta_path}: not a version-1 cache")
    return cache_dir, meta


def cmd_prepare(args):
    settings = _settings(args)
    data_dir = Path(_require(settings, "data_dir", "--data-dir"))
    out_dir = Path(_require(settings, "out", "--out"))
    hyper = _hyper(settings)
    min_count = int(settings.get("min_count", 1))

    records = {}
    for split in SPLITS:
        path = data_dir / f"{split}.tsv"
        if not path.exists():
            raise UsageError(f"dataset file not found: {path}")
        records[split] = parse_tsv(path)
        expected = EXPECTED_SPLIT_SIZES[split]
        note = ("matches the published size" if len(records[split]) == expected
                else f"WARNING: published size is {expected}")
        print(f"{split}: {len(records[split])} records ({note})")

    vocab = build_vocab(records["train"], min_count=min_count)
    store = None
    if settings.get("embeddings"):
        store = load_word_vectors(settings["embeddings"], expected_dim=hyper.embed_dim)
        print(f"loaded {len(store)} pretrained vectors "
              f"(coverage {100.0 * coverage(vocab, store):.1f}% of vocab)")
    else:
        print("no pretrained embeddings given; using hash-seeded fallback vectors")
    matrix = build_embedding_matrix(vocab, store, dim=hyper.embed_dim)

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "vocab.json").write_text(vocab.to_json(), encoding="utf-8")
    np.save(out_dir / "embeddings.npy", matrix)
    sizes = {}
    for split in SPLITS:
        dataset = EncodedDataset.from_examples(
            [encode_record(r, vocab) for r in records[split]])
        dataset.to_jsonl(out_dir / f"{split}.jsonl")
        sizes[split] = len(dataset)
    meta = {
        "format": "liar-cache", "version": 1,
        "embed_dim": hyper.embed_dim, "min_count": min_count,
        "vocab_sha256": vocab.sha256(), "splits": sizes,
        "coverage": coverage(vocab, store) if store is not None else None,
    }
    (out_dir / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"vocab: {len(vocab)} ids (sha256 {meta['vocab_sha256'][:12]}...)")
    print(f"wrote cache to {out_dir}")
    return 0


def _load_cache_dataset(cache_dir, split):
    path = Path(cache_dir) / f"{split}.jsonl"
    if not path.exists():
        raise UsageError(f"cache split not found: {path}")
    return EncodedDataset.from_jsonl(path)


def cmd_train(args):
    settings = _settings(args)
    cache_dir, meta = _cache_paths(_require(settings, "data_dir", "--data-dir"))
    out_dir = Path(_require(settings, "out", "--out"))
    model_tag = _require(settings, "model", "--model")
    if model_tag not in ARCHITECTURES:
        raise UsageError(f"unknown model {model_tag!r}; expected one of {ARCHITECTURES}")
    hyper = _hyper(settings)
    if hyper.embed_dim != meta["embed_dim"]:
        raise UsageError(f"hyper embed_dim {hyper.embed_dim} does not match "
                         f"cache embed_dim {meta['embed_dim']}")
    config = _train_config(settings)

    matrix = np.load(cache_dir / "embeddings.npy")
    train_set = _load_cache_dataset(cache_dir, "train")
    val_set = _load_cache_dataset(cache_dir, "valid")
    model = build_model(model_tag, matrix, hyper, seed=config.seed)
    print(f"training {model_tag}: {model.num_parameters()} trainable parameters, "
          f"{len(train_set)} train / {len(val_set)} valid examples, "
          f"batch {config.batch_size}, {config.epochs} epochs, seed {config.seed}")

    result = train(model, train_set, config, val_set=val_set)

    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / f"{model_tag}.ckpt"
    save_checkpoint(checkpoint_path, model, meta["vocab_sha256"])
    (out_dir / "train.log").write_text(
        "\n".join(train_log_lines(result.log)) + "\n", encoding="utf-8")
    if result.log:
        save_training_curves(result.log, out_dir / "training_curves.png",
                             title=f"{model_tag} training")
    if result.stopped_early:
        print(f"early stop after epoch {result.log[-1].epoch} "
              f"(no improvement for {config.patience} epochs)")
    best = result.best_val_accuracy
    print(f"final validation accuracy: "
          f"{best if best is not None else float('nan'):.4f} "
          f"(best epoch {result.best_epoch})")
    print(f"wrote {checkpoint_path}")
    return 0


def cmd_evaluate(args):
    settings = _settings(args)
    cache_dir, meta = _cache_paths(_require(settings, "data_dir", "--data-dir"))
    checkpoint_path = Path(_require(settings, "checkpoint", "--checkpoint"))
    out_dir = Path(_require(settings, "out", "--out"))
    split = settings.get("split", "test")
    if split not in SPLITS:
        raise UsageError(f"unknown split {split!r}; expected one of {SPLITS}")
    if not checkpoint_path.exists():
        raise UsageError(f"checkpoint not found: {checkpoint_path}")

    model, header = load_checkpoint(checkpoint_path,
                                    expected_vocab_sha256=meta["vocab_sha256"])
    dataset = _load_cache_dataset(cache_dir, split)
    _, predicted = predict_batch(model, dataset)
    matrix = confusion(dataset.labels, predicted)
    rep = metrics(matrix)

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(render_text(rep, matrix), encoding="utf-8")
    (out_dir / "report.json").write_text(render_json(rep, matrix), encoding="utf-8")
    (out_dir / "confusion.txt").write_text(format_confusion(matrix), encoding="utf-8")
    save_confusion_heatmap(matrix, out_dir / "confusion.png",
                           title=f"{header['architecture']} on {split}")
    print(f"evaluated {header['architecture']} on {split}: "
          f"accuracy {rep.accuracy:.4f} ({int(np.trace(matrix))}/{rep.total})")
    print(f"wrote reports to {out_dir}")
    return 0


def cmd_verify(args):
    passed = failed = 0
    for group in (selfcheck.metrics_reproduction_checks,
                  selfcheck.op_gradient_checks,
                  selfcheck.model_gradient_checks):
        for result in group():
            print(result, flush=True)
            if result.passed:
                passed += 1
            else:
                failed += 1
    print(f"\n{passed}/{passed + failed} checks passed")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="liarnet",
        description="Six-class fake-news classification on the LIAR benchmark.")
    parser.add_argument("--version", action="version", version=f"liarnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file; flags override it")
        p.add_argument("--data-dir", dest="data_dir", help="input directory")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="random seed")

    p = sub.add_parser("prepare", help="parse TSVs, build vocab, encode splits")
    common(p)
    p.add_argument("--embeddings", help="pretrained word-vector file (binary or text)")
    p.add_argument("--min-count", dest="min_count", type=int,
                   help="minimum token count for the vocabulary (default 1)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train one architecture on a prepared cache")
    common(p)
    p.add_argument("--model", choices=ARCHITECTURES, help="architecture to train")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="mini-batch size")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint and write reports")
    common(p)
    p.add_argument("--checkpoint", help="checkpoint file from 'train'")
    p.add_argument("--split", choices=SPLITS, help="cache split to evaluate (default test)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="run the embedded reference and gradient checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ParseError, EmbeddingFormatError, CheckpointError,
            ShapeError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
