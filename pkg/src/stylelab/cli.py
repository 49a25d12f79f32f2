"""Command-line entry points: ``stylelab train | transfer | evaluate | ...``.

Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import pickle
import sys

from .checkpoint import checkpoint_series, load_checkpoint
from .config import load_config
from .data import generate_synthetic, infer_schema, load_synthetic_spec, load_tsv, summarize, write_tsv
from .errors import ConfigError, ContractError, InputError, StyleLabError
from .metrics.bleu import sbleu
from .metrics.classifier import NGramClassifier, accuracy, train_classifier
from .metrics.embeddings import EmbeddingTable, train_embeddings
from .metrics.lm import train_lm
from .metrics.report import evaluate_corpus
from .text import tokenize
from .training import run_training, transfer, transfer_content_mse

CACHE_ENV = "STYLELAB_CACHE"


class UsageError(StyleLabError):
    pass


def _read_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {path}") from exc
    except UnicodeDecodeError as exc:
        raise UsageError(f"{path} is not valid UTF-8") from exc


def _parse_styles(lines, schema, path):
    styles = []
    for lineno, line in enumerate(lines, start=1):
        try:
            styles.append(schema.parse(line))
        except InputError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from exc
    return styles


def cache_dir():
    return os.environ.get(CACHE_ENV) or os.path.join(os.path.expanduser("~"), ".cache", "stylelab")


def _corpus_key(path, tag):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    h.update(tag.encode())
    return h.hexdigest()[:20]


def eval_artifacts(train_path, seed=0, lm_order=5, emb_dim=100):
    """Classifier, LM and embeddings for a TSV training corpus, cached by corpus hash."""
    schema = infer_schema(train_path)
    root = os.path.join(cache_dir(), _corpus_key(train_path, f"seed={seed};order={lm_order};dim={emb_dim}"))
    os.makedirs(root, exist_ok=True)
    examples = None

    def corpus():
        nonlocal examples
        if examples is None:
            examples = load_tsv(train_path, schema)[0]
        return examples

    clf_path = os.path.join(root, "classifier.npz")
    if os.path.exists(clf_path):
        clf = NGramClassifier.load(clf_path)
    else:
        clf = train_classifier([e.tokens for e in corpus()], [e.style for e in corpus()], schema, seed=seed)
        clf.save(clf_path)
    lm_path = os.path.join(root, "lm.pkl")
    if os.path.exists(lm_path):
        with open(lm_path, "rb") as fh:
            lm = pickle.load(fh)
    else:
        lm = train_lm([e.tokens for e in corpus()], order=lm_order)
        with open(lm_path, "wb") as fh:
            pickle.dump(lm, fh)
    emb_path = os.path.join(root, "embeddings.npz")
    if os.path.exists(emb_path):
        emb = EmbeddingTable.load(emb_path)
    else:
        emb = train_embeddings([e.tokens for e in corpus()], dim=emb_dim, seed=seed)
        emb.save(emb_path)
    return clf, lm, emb


# -- commands -----------------------------------------------------------------

def cmd_train(args):
    cfg = load_config(args.config)
    out = run_training(cfg, progress=None if args.quiet else _print_progress)
    print(f"wrote {os.path.join(out, 'train_log.csv')} and {os.path.join(out, 'checkpoints')}")


def _print_progress(row):
    acc, sb = row.get("dev_acc"), row.get("dev_sbleu")
    loss = row.get("total")
    loss_s = "-" if loss is None else f"{loss:.3f}"
    print(f"step {row['step']:>6}  loss {loss_s}  dev acc {acc:.1f}  dev sBLEU {sb:.1f}", flush=True)


def cmd_transfer(args):
    ckpt = load_checkpoint(args.ckpt)
    texts = [tokenize(t) for t in _read_lines(args.inputs)]
    style_lines = _read_lines(args.styles)
    if len(style_lines) != len(texts):
        raise UsageError(f"{args.inputs} has {len(texts)} lines but {args.styles} has {len(style_lines)}")
    styles = _parse_styles(style_lines, ckpt.schema, args.styles)
    outputs = transfer(ckpt.generator, ckpt.vocab, texts, styles)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for toks in outputs:
            fh.write(" ".join(toks) + "\n")


def cmd_evaluate(args):
    inputs = [tokenize(t) for t in _read_lines(args.inputs)]
    preds = [tokenize(t) for t in _read_lines(args.pred)]
    style_lines = _read_lines(args.styles)
    if not (len(inputs) == len(preds) == len(style_lines)):
        raise UsageError(f"misaligned files: {len(inputs)} inputs, {len(preds)} predictions, "
                         f"{len(style_lines)} styles")
    refs = None
    if args.refs:
        refs = [tokenize(t) for t in _read_lines(args.refs)]
        if len(refs) != len(preds):
            raise UsageError(f"misaligned files: {len(preds)} predictions, {len(refs)} references")
    if args.train:
        clf, lm, emb = eval_artifacts(args.train, seed=args.seed, lm_order=args.lm_order)
    elif args.classifier:
        clf, lm, emb = NGramClassifier.load(args.classifier), None, None
    else:
        raise UsageError("evaluate needs --train CORPUS.tsv or --classifier PATH")
    if args.classifier:
        clf = NGramClassifier.load(args.classifier)
    targets = _parse_styles(style_lines, clf.schema, args.styles)
    os.makedirs(args.out_dir, exist_ok=True)
    if inputs:
        report = evaluate_corpus(inputs, preds, targets, clf, lm, emb, refs)
        with open(os.path.join(args.out_dir, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(report.table())
        with open(os.path.join(args.out_dir, "report.csv"), "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
        print(report.table(), end="")
    if args.ckpt_dir:
        series = checkpoint_series(args.ckpt_dir)
        if not series:
            raise UsageError(f"no step_*.npz checkpoints in {args.ckpt_dir}")
        write_checkpoint_curves(series, inputs, targets, clf, args.out_dir)


def write_checkpoint_curves(series, inputs, targets, clf, out_dir):
    """Per-checkpoint (accuracy, sBLEU) and content-MSE CSVs."""
    trade = os.path.join(out_dir, "tradeoff.csv")
    mse = os.path.join(out_dir, "content_mse.csv")
    with open(trade, "w", encoding="utf-8", newline="") as ft, open(mse, "w", encoding="utf-8", newline="") as fm:
        wt = csv.writer(ft, lineterminator="\n")
        wm = csv.writer(fm, lineterminator="\n")
        wt.writerow(["step", "accuracy", "sbleu"])
        wm.writerow(["step", "content_mse"])
        for step, path in series:
            ckpt = load_checkpoint(path)
            try:
                ck_clf = clf.aligned_to(ckpt.schema)
            except ContractError as exc:
                raise UsageError(f"{path}: checkpoint schema does not match the classifier") from exc
            ck_targets = [ckpt.schema.parse(clf.schema.format(t)) for t in targets]
            outputs = transfer(ckpt.generator, ckpt.vocab, inputs, ck_targets)
            wt.writerow([step, repr(accuracy(outputs, ck_targets, ck_clf)), repr(sbleu(outputs, inputs))])
            wm.writerow([step, repr(transfer_content_mse(ckpt.generator, ckpt.vocab, inputs, outputs))])
    return trade, mse


def cmd_train_classifier(args):
    schema = infer_schema(args.train)
    examples, _ = load_tsv(args.train, schema)
    clf = train_classifier([e.tokens for e in examples], [e.style for e in examples], schema,
                           epochs=args.epochs, seed=args.seed)
    clf.save(args.out)
    print(f"wrote {args.out} ({len(examples)} examples, final loss {clf.loss_curve[-1]:.4f})")


def cmd_synth(args):
    spec = load_synthetic_spec(args.spec)
    ds = generate_synthetic(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    for name in ("train", "dev", "test"):
        write_tsv(os.path.join(args.out_dir, f"{name}.tsv"), getattr(ds, name), ds.schema)
    print(summarize(ds.train, ds.schema).table(), end="")


def cmd_summarize(args):
    schema = infer_schema(args.inputs)
    examples, errors = load_tsv(args.inputs, schema)
    for err in errors:
        print(f"line {err.line}: {err.message}", file=sys.stderr)
    print(summarize(examples, schema, args.max_tokens).table(), end="")


def build_parser():
    p = argparse.ArgumentParser(prog="stylelab", description="Unsupervised text style transfer laboratory.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a generator under a supervision regime")
    t.add_argument("--config", required=True)
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    x = sub.add_parser("transfer", help="rewrite texts toward target styles")
    x.add_argument("--ckpt", required=True)
    x.add_argument("--in", dest="inputs", required=True)
    x.add_argument("--styles", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_transfer)

    e = sub.add_parser("evaluate", help="score predictions and checkpoint series")
    e.add_argument("--in", dest="inputs", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--styles", required=True)
    e.add_argument("--refs")
    e.add_argument("--ckpt-dir")
    e.add_argument("--out-dir", required=True)
    e.add_argument("--train", help="TSV corpus for training (cached) classifier, LM and embeddings")
    e.add_argument("--classifier", help="pre-trained classifier .npz (overrides the one from --train)")
    e.add_argument("--lm-order", type=int, default=5)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("train-classifier", help="fit the n-gram style classifier on a TSV corpus")
    c.add_argument("--train", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--epochs", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("synth", help="write a synthetic corpus as train/dev/test TSV files")
    s.add_argument("--spec", help="synthetic spec file (default: bundled binary sentiment)")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("summarize", help="per-attribute counts for a TSV corpus")
    m.add_argument("--in", dest="inputs", required=True)
    m.add_argument("--max-tokens", type=int)
    m.set_defaults(func=cmd_summarize)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (UsageError, ConfigError, InputError, ContractError) as exc:
        print(f"stylelab: error: {exc}", file=sys.stderr)
        return 2
    except StyleLabError as exc:
        print(f"stylelab: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"stylelab: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
