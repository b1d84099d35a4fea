"""Insert predicted punctuation or spacing into unpunctuated text."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import torch

from .checkpoint import Checkpoint, VocabMismatch
from .model import TokenClassifier, predict
from .schemes import INVENTORY_SET, O, SPACE_LABEL, Task
from .tokenizer import Vocab, encode_chars

logger = logging.getLogger(__name__)

SPACES = frozenset(" 　")
_STRIP = INVENTORY_SET | SPACES


class MarksStripped(UserWarning):
    pass


@dataclass(frozen=True)
class RestorationResult:
    text: str
    insertions: tuple[tuple[int, str, float], ...] = field(default=())
    """``(index of the character the mark follows, label, probability)``."""


def strip_marks(text: str) -> str:
    """Remove the six inventory marks and spaces, leaving everything else in place."""
    return "".join(ch for ch in text if ch not in _STRIP)


def windows(n: int, budget: int, overlap: int) -> list[tuple[int, int, int, int]]:
    """``(window_start, window_end, core_start, core_end)`` covering ``range(n)``.

    Cores tile the text; each window adds up to ``overlap`` characters of
    context on both sides. A text that fits one window is never cut.
    """
    if n <= budget:
        return [(0, n, 0, n)] if n else []
    core = budget - 2 * overlap
    if core < 1:
        raise ValueError(f"overlap {overlap} leaves no core in a {budget}-character window")
    out = []
    for start in range(0, n, core):
        end = min(n, start + core)
        out.append((max(0, start - overlap), min(n, end + overlap), start, end))
    return out


def _label_chars(chars: str, checkpoint: Checkpoint, model: TokenClassifier, overlap: int, batch_size: int):
    budget = checkpoint.config.max_len - 2
    spans = windows(len(chars), budget, overlap)
    labels: list[int] = [0] * len(chars)
    probs: list[float] = [0.0] * len(chars)
    for b in range(0, len(spans), batch_size):
        group = spans[b : b + batch_size]
        width = max(we - ws for ws, we, _, _ in group) + 2
        encs = [encode_chars(chars[ws:we], checkpoint.vocab, width) for ws, we, _, _ in group]
        ids = torch.tensor([e.ids for e in encs])
        mask = torch.tensor([e.attention_mask for e in encs])
        pred, conf = predict(model, ids, mask)
        for (ws, _, cs, ce), row, prow in zip(group, pred, conf):
            for i in range(cs, ce):
                labels[i] = row[i - ws]
                probs[i] = prow[i - ws]
    return labels, probs


def restore(
    text: str,
    checkpoint: Checkpoint,
    overlap: int = 32,
    *,
    vocab: Vocab | None = None,
    model: TokenClassifier | None = None,
    batch_size: int = 32,
) -> RestorationResult:
    """Predict a label for every character and write the marks back in.

    Existing marks and spaces are stripped first. Line breaks are kept and
    each line is restored on its own.
    """
    if vocab is not None and vocab.sha256 != checkpoint.vocab_sha256:
        raise VocabMismatch("vocabulary does not match the checkpoint")
    clean = strip_marks(text)
    if clean != text:
        warnings.warn(MarksStripped("input already contained marks or spaces; they were removed"), stacklevel=2)
    if not clean:
        return RestorationResult("")
    model = model or checkpoint.build_model()
    scheme = checkpoint.scheme
    spacing = scheme.task is Task.SPACING

    out: list[str] = []
    insertions: list[tuple[int, str, float]] = []
    offset = 0
    for line in clean.splitlines(keepends=True):
        body = line.rstrip("\r\n")
        labels, probs = _label_chars(body, checkpoint, model, overlap, batch_size) if body else ([], [])
        for i, ch in enumerate(body):
            out.append(ch)
            lab = scheme.labels[labels[i]]
            if lab != O:
                out.append(" " if spacing and lab == SPACE_LABEL else lab)
                insertions.append((offset + i, lab, probs[i]))
        out.append(line[len(body) :])
        offset += len(line)
    return RestorationResult("".join(out), tuple(insertions))
