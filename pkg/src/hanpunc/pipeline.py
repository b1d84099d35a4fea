"""Training with best-on-validation retention, and per-label evaluation."""

from __future__ import annotations

import copy
import csv
import io
import logging
import math
import random
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from .checkpoint import Checkpoint
from .dataset import LabeledCorpus, UnknownLabel
from .model import AdamW, ModelConfig, TokenClassifier, loss, predict
from .schemes import LabelScheme, O, Task, label_name
from .tokenizer import Vocab, encode, encode_chars

logger = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    """batch is None when the validation loss is the one that diverged."""

    def __init__(self, epoch: int, batch: int | None, value: float) -> None:
        where = "validation" if batch is None else f"batch {batch}"
        super().__init__(f"loss {value} at epoch {epoch}, {where}")
        self.epoch = epoch
        self.batch = batch


class SchemeMismatch(ValueError):
    pass


class EmptyValidation(UserWarning):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 16
    epochs: int = 15
    lr: float = 5e-5
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    seed: int = 0
    checkpoint_path: str | None = None
    history_path: str | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None


def history_csv(history: Sequence[EpochRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "train_loss", "val_loss"])
    for rec in history:
        val = "" if rec.val_loss is None else repr(rec.val_loss)
        writer.writerow([rec.epoch, repr(rec.train_loss), val])
    return buf.getvalue()


def collate(
    sequences: Sequence, vocab: Vocab, scheme: LabelScheme | None = None
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Pad a batch to its own longest row (characters + CLS/SEP)."""
    width = max(len(s) for s in sequences) + 2
    rows = []
    for s in sequences:
        if scheme is None:
            rows.append(encode_chars(s if isinstance(s, str) else s.chars, vocab, width))
        else:
            rows.append(encode(s, vocab, width, scheme))
    ids = torch.tensor([r.ids for r in rows], dtype=torch.long)
    mask = torch.tensor([r.attention_mask for r in rows], dtype=torch.long)
    labels = torch.tensor([r.label_ids for r in rows], dtype=torch.long)
    return ids, mask, labels


def _batches(items: Sequence, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


@torch.no_grad()
def mean_loss(model: TokenClassifier, corpus: LabeledCorpus, vocab: Vocab, batch_size: int = 64) -> float:
    """Token-weighted mean cross-entropy over a corpus, dropout off."""
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    for batch in _batches(corpus.sequences, batch_size):
        ids, mask, labels = collate(batch, vocab, corpus.scheme)
        value, n = loss(model(ids, mask), labels)
        total += value.item() * n
        count += n
    model.train(was_training)
    return total / count


def train(
    model_config: ModelConfig,
    config: TrainingConfig,
    train_set: LabeledCorpus,
    val_set: LabeledCorpus,
    vocab: Vocab,
) -> tuple[Checkpoint, list[EpochRecord]]:
    """Fit a fresh model and keep the parameters of the lowest-validation-loss epoch."""
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if val_set.scheme != train_set.scheme:
        raise SchemeMismatch("train and validation schemes differ")
    if model_config.num_labels != len(train_set.scheme):
        raise SchemeMismatch("model num_labels differs from the corpus scheme")
    if model_config.vocab_size != len(vocab):
        raise ValueError("model vocab_size differs from the vocabulary")
    if len(val_set) == 0:
        warnings.warn(EmptyValidation("no validation data; keeping the last epoch"), stacklevel=2)

    scheme = train_set.scheme
    rng = random.Random(config.seed)
    history: list[EpochRecord] = []
    best_state, best_loss, best_epoch = None, math.inf, 0

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = TokenClassifier(model_config)
        optimizer = AdamW(
            model.parameters(),
            lr=config.lr,
            betas=config.betas,
            eps=config.eps,
            weight_decay=config.weight_decay,
        )
        order = list(range(len(train_set)))
        for epoch in range(1, config.epochs + 1):
            model.train()
            rng.shuffle(order)
            total, count = 0.0, 0
            for b, idx in enumerate(_batches(order, config.batch_size)):
                ids, mask, labels = collate([train_set.sequences[i] for i in idx], vocab, scheme)
                optimizer.zero_grad(set_to_none=True)
                value, n = loss(model(ids, mask), labels)
                if not torch.isfinite(value):
                    raise NonFiniteLoss(epoch, b, value.item())
                value.backward()
                optimizer.step()
                total += value.item() * n
                count += n
            train_loss = total / count
            val_loss = mean_loss(model, val_set, vocab) if len(val_set) else None
            if val_loss is not None and not math.isfinite(val_loss):
                raise NonFiniteLoss(epoch, None, val_loss)
            history.append(EpochRecord(epoch, train_loss, val_loss))
            logger.info("epoch %d train_loss %.5f val_loss %s", epoch, train_loss, val_loss)
            if val_loss is None or val_loss < best_loss:
                best_loss = math.inf if val_loss is None else val_loss
                best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())

    checkpoint = Checkpoint(
        model_config,
        best_state,
        vocab,
        scheme,
        best_val_loss=None if math.isinf(best_loss) else best_loss,
        epoch_of_best=best_epoch,
    )
    if config.checkpoint_path:
        checkpoint.save(config.checkpoint_path)
    if config.history_path:
        Path(config.history_path).write_text(history_csv(history), encoding="utf-8")
    return checkpoint, history


# -- metrics ------------------------------------------------------------------


def metrics_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 with 0/0 taken as 0."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class LabelMetrics:
    tp: int
    fp: int
    fn: int

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def precision(self) -> float:
        return metrics_from_counts(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return metrics_from_counts(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return metrics_from_counts(self.tp, self.fp, self.fn)[2]


@dataclass(frozen=True)
class MetricsReport:
    scheme: LabelScheme
    exclude_O: bool
    rows: dict[str, LabelMetrics]
    micro: LabelMetrics
    macro: tuple[float, float, float]
    accuracy: float
    num_positions: int
    macro_labels: tuple[str, ...] = field(default=())

    def table(self) -> str:
        head = f"{'label':<10}{'precision':>11}{'recall':>9}{'f1':>9}{'support':>10}"
        lines = [head, "-" * len(head)]
        for lab, m in self.rows.items():
            lines.append(
                f"{label_name(lab):<10}{m.precision:>11.4f}{m.recall:>9.4f}{m.f1:>9.4f}{m.support:>10d}"
            )
        lines.append("-" * len(head))
        m = self.micro
        lines.append(f"{'micro':<10}{m.precision:>11.4f}{m.recall:>9.4f}{m.f1:>9.4f}{m.support:>10d}")
        p, r, f = self.macro
        lines.append(f"{'macro':<10}{p:>11.4f}{r:>9.4f}{f:>9.4f}{'':>10}")
        lines.append(f"token accuracy {self.accuracy:.4f} over {self.num_positions} positions")
        if self.exclude_O:
            lines.append("label O excluded")
        return "\n".join(lines) + "\n"

    def key_values(self) -> str:
        out = [
            f"task\t{self.scheme.task.value}",
            f"exclude_O\t{str(self.exclude_O).lower()}",
            f"positions\t{self.num_positions}",
            f"accuracy\t{self.accuracy:.6f}",
        ]
        for lab, m in self.rows.items():
            name = label_name(lab)
            out += [
                f"{name}.precision\t{m.precision:.6f}",
                f"{name}.recall\t{m.recall:.6f}",
                f"{name}.f1\t{m.f1:.6f}",
                f"{name}.support\t{m.support}",
            ]
        m = self.micro
        out += [
            f"micro.precision\t{m.precision:.6f}",
            f"micro.recall\t{m.recall:.6f}",
            f"micro.f1\t{m.f1:.6f}",
            f"micro.tp\t{m.tp}",
            f"micro.fp\t{m.fp}",
            f"micro.fn\t{m.fn}",
        ]
        p, r, f = self.macro
        out += [f"macro.precision\t{p:.6f}", f"macro.recall\t{r:.6f}", f"macro.f1\t{f:.6f}"]
        return "\n".join(out) + "\n"


def score(
    gold: Sequence[Sequence[str]],
    pred: Sequence[Sequence[str]],
    scheme: LabelScheme,
    exclude_O: bool | None = None,
) -> MetricsReport:
    """Per-label counts over aligned gold/predicted label sequences.

    With ``exclude_O`` the O row is dropped: O/O agreements count for
    nothing, O predicted as X is an fp of X, X predicted as O an fn of X.
    """
    if exclude_O is None:
        exclude_O = scheme.task is Task.PUNCTUATION
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sequences but {len(pred)} predicted")
    tp: Counter[str] = Counter()
    fp: Counter[str] = Counter()
    fn: Counter[str] = Counter()
    correct = total = 0
    for g_seq, p_seq in zip(gold, pred):
        if len(g_seq) != len(p_seq):
            raise ValueError("gold and predicted sequences differ in length")
        for g, p in zip(g_seq, p_seq):
            total += 1
            if g == p:
                correct += 1
                tp[g] += 1
            else:
                fp[p] += 1
                fn[g] += 1
    labels = [lab for lab in scheme.labels if not (exclude_O and lab == O)]
    unknown = (set(tp) | set(fp) | set(fn)) - set(scheme.labels)
    if unknown:
        raise SchemeMismatch(f"labels {sorted(unknown)} not in scheme")
    rows = {lab: LabelMetrics(tp[lab], fp[lab], fn[lab]) for lab in labels}
    micro = LabelMetrics(
        sum(m.tp for m in rows.values()),
        sum(m.fp for m in rows.values()),
        sum(m.fn for m in rows.values()),
    )
    present = tuple(lab for lab, m in rows.items() if m.tp + m.fp + m.fn)
    if present:
        macro = tuple(sum(getattr(rows[lab], k) for lab in present) / len(present) for k in ("precision", "recall", "f1"))
    else:
        macro = (0.0, 0.0, 0.0)
    return MetricsReport(
        scheme,
        exclude_O,
        rows,
        micro,
        macro,
        accuracy=correct / total if total else 0.0,
        num_positions=total,
        macro_labels=present,
    )


def predict_corpus(
    checkpoint: Checkpoint, corpus: LabeledCorpus, batch_size: int = 64, model: TokenClassifier | None = None
) -> list[list[str]]:
    model = model or checkpoint.build_model()
    labels = checkpoint.scheme.labels
    out: list[list[str]] = []
    for batch in _batches(corpus.sequences, batch_size):
        ids, mask, _ = collate(batch, checkpoint.vocab, corpus.scheme)
        pred, _ = predict(model, ids, mask)
        out.extend([labels[i] for i in row] for row in pred)
    return out


def evaluate(checkpoint: Checkpoint, test_set: LabeledCorpus, exclude_O: bool | None = None) -> MetricsReport:
    """Score the checkpoint's predictions on ``test_set``.

    ``exclude_O`` defaults to true for punctuation and false for spacing.
    """
    if test_set.scheme != checkpoint.scheme:
        raise SchemeMismatch(
            f"checkpoint predicts {checkpoint.scheme.task.value}, test set is {test_set.scheme.task.value}"
        )
    pred = predict_corpus(checkpoint, test_set)
    gold = [s.labels for s in test_set.sequences]
    return score(gold, pred, test_set.scheme, exclude_O)


def cooccurrence_report(corpus: LabeledCorpus, label: str, window: int = 1) -> list[tuple[str, int]]:
    """Rank characters by how often they sit in the ``window`` characters ending at a ``label`` mark.

    The window includes the character that carries the label, so with
    ``window=1`` this counts the carriers themselves.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    if label not in corpus.scheme:
        raise UnknownLabel(label)
    counts: Counter[str] = Counter()
    for seq in corpus.sequences:
        for i, lab in enumerate(seq.labels):
            if lab == label:
                counts.update(seq.chars[max(0, i - window + 1) : i + 1])
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
