"""Command-line entry point: ``hanpunc <command> [options]``.

Options may also come from a key-value config file given with
``--config``: one ``key = value`` per line, ``#`` comments, keys spelled as
the long flag without dashes (``batch_size`` or ``batch-size``). Flags
override the file, the file overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .checkpoint import Checkpoint, CheckpointError
from .dataset import (
    DatasetError,
    LabeledCorpus,
    SplitSpec,
    derive_spacing,
    format_distribution,
    label_distribution,
    load_conll,
    save_conll,
    split,
)
from .model import ModelConfig
from .normalizer import (
    NormalizationError,
    NormalizationRules,
    RawDocument,
    RuleFileError,
    Source,
    default_rules,
    extract_labels,
    normalize,
    split_sequences,
)
from .pipeline import SchemeMismatch, TrainingConfig, cooccurrence_report, evaluate, train
from .restore import restore
from .schemes import PUNCTUATION, LabelScheme, Task, label_name
from .tokenizer import Vocab, build_vocab

logger = logging.getLogger("hanpunc")

TASKS = {"punct": Task.PUNCTUATION, "punctuation": Task.PUNCTUATION, "spacing": Task.SPACING}


class UsageError(Exception):
    pass


def parse_config_file(path: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"--config {path}: line {lineno} is not 'key = value'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _task(value: str) -> Task:
    try:
        return TASKS[value.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown task {value!r} (punct or spacing)") from None


def _read_docs(directory: Path, source: str) -> list[RawDocument]:
    if not directory.is_dir():
        raise UsageError(f"--in: {directory} is not a directory")
    return [
        RawDocument.from_bytes(p.stem, p.read_bytes(), source) for p in sorted(directory.glob("*.txt"))
    ]


# -- commands -----------------------------------------------------------------


def cmd_normalize(args) -> int:
    rules = NormalizationRules.from_file(args.rules) if args.rules else default_rules()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kept = 0
    for doc in _read_docs(Path(args.input), args.source):
        text = normalize(doc, rules)
        (out / f"{doc.id}.txt").write_text(text + "\n", encoding="utf-8")
        kept += bool(text)
    logger.info("normalized %d document(s) into %s", kept, out)
    return 0


def cmd_build_dataset(args) -> int:
    rules = NormalizationRules.from_file(args.rules) if args.rules else None
    sequences = []
    for path in sorted(Path(args.input).glob("*.txt")):
        text = path.read_text(encoding="utf-8").strip("\n")
        if rules is not None:
            text = normalize(RawDocument(path.stem, text, args.source), rules)
        if not text:
            continue
        seq = extract_labels(text, PUNCTUATION, id=path.stem, source=args.source)
        sequences.extend(split_sequences(seq, args.max_len))
    if not sequences:
        raise UsageError(f"--in: no sequences found under {args.input}")
    corpus = LabeledCorpus(PUNCTUATION, tuple(sequences))
    if args.task is Task.SPACING:
        corpus = derive_spacing(corpus)
    spec = SplitSpec(
        train_fraction=1 - args.test_fraction,
        test_fraction=args.test_fraction,
        val_fraction_of_train=args.val_fraction,
        seed=args.seed,
    )
    parts = split(corpus, spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("train", "val", "test"):
        save_conll(getattr(parts, name), out / f"{name}.conll")
    (out / "manifest.txt").write_text(parts.manifest(), encoding="utf-8")
    (out / "stats.txt").write_text(format_distribution(label_distribution(corpus)), encoding="utf-8")
    print(f"{len(parts.train)} train / {len(parts.val)} val / {len(parts.test)} test sequences")
    return 0


def cmd_build_vocab(args) -> int:
    scheme = LabelScheme.for_task(args.task)
    corpora = [load_conll(p, scheme) for p in args.data]
    base = None
    if args.base:
        # Specials in a base list are skipped by build_vocab.
        base = [t for t in Path(args.base).read_text(encoding="utf-8").split("\n") if t]
    vocab = build_vocab(corpora, base)
    vocab.save(args.out)
    print(f"{len(vocab)} tokens ({vocab.num_added} added from data)")
    return 0


def cmd_train(args) -> int:
    vocab = Vocab.load(args.vocab)
    scheme = LabelScheme.for_task(args.task)
    train_set = load_conll(args.train, scheme)
    val_set = load_conll(args.val, scheme) if args.val else LabeledCorpus(scheme)
    model_config = ModelConfig(
        vocab_size=len(vocab),
        num_labels=len(scheme),
        num_layers=args.layers,
        hidden_size=args.hidden,
        num_heads=args.heads,
        ff_size=args.ff,
        max_len=args.max_len,
        dropout=args.dropout,
        seed=args.seed,
    )
    config = TrainingConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        lr=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
        checkpoint_path=args.out,
        history_path=args.history,
    )
    checkpoint, history = train(model_config, config, train_set, val_set, vocab)
    for rec in history:
        val = "-" if rec.val_loss is None else f"{rec.val_loss:.5f}"
        print(f"epoch {rec.epoch:>3}  train {rec.train_loss:.5f}  val {val}")
    print(f"best epoch {checkpoint.epoch_of_best}; checkpoint written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    checkpoint = Checkpoint.load(args.checkpoint)
    task = args.task or checkpoint.scheme.task
    if task is not checkpoint.scheme.task:
        raise SchemeMismatch(f"--task {task.value} but checkpoint predicts {checkpoint.scheme.task.value}")
    exclude = args.exclude_o
    if exclude is None:
        exclude = task is Task.PUNCTUATION
    report = evaluate(checkpoint, load_conll(args.data, checkpoint.scheme), exclude)
    sys.stdout.write(report.table())
    if args.report:
        Path(args.report).write_text(report.table(), encoding="utf-8")
    if args.metrics:
        Path(args.metrics).write_text(report.key_values(), encoding="utf-8")
    return 0


def cmd_restore(args) -> int:
    checkpoint = Checkpoint.load(args.checkpoint)
    vocab = Vocab.load(args.vocab) if args.vocab else None
    if args.input and args.input != "-":
        text = Path(args.input).read_text(encoding="utf-8")
    else:
        text = sys.stdin.buffer.read().decode("utf-8")
    result = restore(text, checkpoint, args.overlap, vocab=vocab)
    sys.stdout.buffer.write(result.text.encode("utf-8"))
    if args.confidence:
        lines = [f"{pos}\t{label_name(lab)}\t{p:.6f}" for pos, lab, p in result.insertions]
        Path(args.confidence).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    return 0


def cmd_stats(args) -> int:
    corpus = load_conll(args.data, LabelScheme.for_task(args.task))
    sys.stdout.write(format_distribution(label_distribution(corpus)))
    for label in args.cooccur or ():
        ranked = cooccurrence_report(corpus, label, args.window)[: args.top]
        sys.stdout.write(f"\ncharacters within {args.window} before {label_name(label)}:\n")
        for ch, count in ranked:
            sys.stdout.write(f"{ch}\t{count}\n")
    return 0


# -- parser -------------------------------------------------------------------

DEFAULTS = {
    "source": "OTHER",
    "task": None,
    "seed": 0,
    "max_len": 512,
    "test_fraction": 0.1,
    "val_fraction": 0.1,
    "batch_size": 16,
    "epochs": 15,
    "lr": 5e-5,
    "weight_decay": 0.01,
    "layers": 2,
    "hidden": 64,
    "heads": 4,
    "ff": 256,
    "dropout": 0.1,
    "overlap": 32,
    "window": 3,
    "top": 10,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hanpunc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--config", help="key-value config file")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("normalize", help="canonicalize raw *.txt documents")
    p.add_argument("--rules", help="rule file (default: bundled rules)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source", choices=[s.value for s in Source], default=S)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("build-dataset", help="label, cut, split and write CoNLL files")
    p.add_argument("--in", dest="input", required=True, help="directory of canonical *.txt")
    p.add_argument("--out", required=True)
    p.add_argument("--task", type=_task, default=S, help="punct or spacing")
    p.add_argument("--rules", help="normalize the input with this rule file first")
    p.add_argument("--source", choices=[s.value for s in Source], default=S)
    p.add_argument("--max-len", type=int, default=S)
    p.add_argument("--test-fraction", type=float, default=S)
    p.add_argument("--val-fraction", type=float, default=S, help="share of train held out")
    p.add_argument("--seed", type=int, default=S)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("build-vocab", help="character vocabulary from CoNLL files")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--task", type=_task, default=S)
    p.add_argument("--base", help="base token list, one per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train a token classifier")
    p.add_argument("--train", required=True)
    p.add_argument("--val")
    p.add_argument("--vocab", required=True)
    p.add_argument("--task", type=_task, default=S)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="write per-epoch losses as CSV")
    for flag, kind in [
        ("--batch-size", int), ("--epochs", int), ("--lr", float), ("--weight-decay", float),
        ("--seed", int), ("--layers", int), ("--hidden", int), ("--heads", int), ("--ff", int),
        ("--max-len", int), ("--dropout", float),
    ]:
        p.add_argument(flag, type=kind, default=S)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-label precision/recall/F1")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--task", type=_task, default=S)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--exclude-o", dest="exclude_o", action="store_const", const=True, default=S)
    group.add_argument("--include-o", dest="exclude_o", action="store_const", const=False, default=S)
    p.add_argument("--report", help="write the table here too")
    p.add_argument("--metrics", help="write key<TAB>value metrics here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("restore", help="insert marks into raw text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", help="input file (default: stdin)")
    p.add_argument("--vocab", help="verify against this vocabulary")
    p.add_argument("--overlap", type=int, default=S)
    p.add_argument("--confidence", help="write position<TAB>label<TAB>probability here")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("stats", help="label distribution and co-occurring characters")
    p.add_argument("--data", required=True)
    p.add_argument("--task", type=_task, default=S)
    p.add_argument("--cooccur", action="append", metavar="LABEL")
    p.add_argument("--window", type=int, default=S)
    p.add_argument("--top", type=int, default=S)
    p.set_defaults(func=cmd_stats)
    return parser


_CONVERTERS = {
    "seed": int, "max_len": int, "test_fraction": float, "val_fraction": float, "batch_size": int,
    "epochs": int, "lr": float, "weight_decay": float, "layers": int, "hidden": int, "heads": int,
    "ff": int, "dropout": float, "overlap": int, "window": int, "top": int, "task": _task,
    "exclude_o": lambda v: v.lower() in ("1", "true", "yes"),
}


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill options missing from the command line: config file, then defaults."""
    file_values = parse_config_file(args.config) if args.config else {}
    for key, default in {**DEFAULTS, "exclude_o": None}.items():
        if hasattr(args, key):
            continue
        if key in file_values:
            raw = file_values[key]
            try:
                value = _CONVERTERS.get(key, str)(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"--config: bad value for {key}: {exc}") from None
        else:
            value = default
        setattr(args, key, value)
    if args.task is None:
        args.task = None if args.command == "eval" else Task.PUNCTUATION
    return args


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(resolve(args))
    except UsageError as exc:
        parser.error(str(exc))
    except (
        OSError,
        NormalizationError,
        RuleFileError,
        DatasetError,
        CheckpointError,
        SchemeMismatch,
        ValueError,
    ) as exc:
        print(f"hanpunc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
