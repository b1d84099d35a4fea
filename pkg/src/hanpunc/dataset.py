"""CoNLL serialization, spacing derivation, partitioning and label statistics."""

from __future__ import annotations

import io
import logging
import math
import random
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

from .normalizer import RawDocument, NormalizationRules, extract_labels, normalize, split_sequences
from .schemes import (
    PUNCTUATION,
    SPACE_LABEL,
    SPACING,
    LabelScheme,
    NormalizedSequence,
    O,
    Task,
    label_name,
)

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


class UnknownLabel(DatasetError):
    def __init__(self, label: str, lineno: int | None = None) -> None:
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}unknown label {label!r}")
        self.label = label
        self.lineno = lineno


class ConllFormatError(DatasetError):
    pass


class WrongScheme(DatasetError):
    pass


class EmptySequence(UserWarning):
    pass


class DegenerateSplit(UserWarning):
    pass


@dataclass(frozen=True)
class LabeledCorpus:
    scheme: LabelScheme
    sequences: tuple[NormalizedSequence, ...] = ()
    provenance: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sequences", tuple(self.sequences))
        allowed = set(self.scheme.labels)
        for seq in self.sequences:
            if len(seq) == 0:
                raise DatasetError(f"sequence {seq.id!r} is empty")
            bad = set(seq.labels) - allowed
            if bad:
                raise DatasetError(f"sequence {seq.id!r} has labels {sorted(bad)} outside the scheme")
        if not self.provenance and self.sequences:
            object.__setattr__(self, "provenance", dict(Counter(s.source for s in self.sequences)))

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    @property
    def num_chars(self) -> int:
        return sum(len(s) for s in self.sequences)

    def subset(self, indices: Iterable[int]) -> LabeledCorpus:
        return LabeledCorpus(self.scheme, tuple(self.sequences[i] for i in indices))


def build_corpus(
    docs: Iterable[RawDocument],
    rules: NormalizationRules | None = None,
    max_len: int = 512,
) -> LabeledCorpus:
    """Normalize documents and cut them into punctuation-labeled sequences."""
    sequences: list[NormalizedSequence] = []
    for doc in docs:
        text = normalize(doc, rules)
        if not text:
            continue
        seq = extract_labels(text, PUNCTUATION, id=doc.id, source=doc.source.value)
        sequences.extend(split_sequences(seq, max_len))
    return LabeledCorpus(PUNCTUATION, tuple(sequences))


# -- CoNLL ------------------------------------------------------------------


def write_conll(corpus: LabeledCorpus, stream: IO[bytes] | None = None) -> bytes:
    """Serialize one ``char<TAB>label`` line per character, blank line per sequence."""
    buf = io.StringIO()
    for seq in corpus.sequences:
        for ch, lab in zip(seq.chars, seq.labels):
            buf.write(f"{ch}\t{lab}\n")
        buf.write("\n")
    data = buf.getvalue().encode("utf-8")
    if stream is not None:
        stream.write(data)
    return data


def read_conll(data: bytes | IO[bytes], scheme: LabelScheme, *, id_prefix: str = "") -> LabeledCorpus:
    if not isinstance(data, (bytes, bytearray)):
        data = data.read()
    try:
        text = bytes(data).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConllFormatError(f"not UTF-8 at byte {exc.start}") from None
    allowed = set(scheme.labels)
    sequences: list[NormalizedSequence] = []
    chars: list[str] = []
    labels: list[str] = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, 1):
        if line == "":
            if chars:
                sequences.append(
                    NormalizedSequence("".join(chars), tuple(labels), id=f"{id_prefix}{len(sequences)}")
                )
                chars, labels = [], []
            else:
                warnings.warn(EmptySequence(f"line {lineno}: empty sequence skipped"), stacklevel=2)
            continue
        ch, sep, lab = line.partition("\t")
        if not sep or len(ch) != 1 or "\t" in lab:
            raise ConllFormatError(f"line {lineno}: expected 'char<TAB>label', got {line!r}")
        if lab not in allowed:
            raise UnknownLabel(lab, lineno)
        chars.append(ch)
        labels.append(lab)
    if chars:
        raise ConllFormatError("stream must end with a blank line")
    return LabeledCorpus(scheme, tuple(sequences))


def save_conll(corpus: LabeledCorpus, path: str | Path) -> None:
    Path(path).write_bytes(write_conll(corpus))


def load_conll(path: str | Path, scheme: LabelScheme) -> LabeledCorpus:
    path = Path(path)
    return read_conll(path.read_bytes(), scheme, id_prefix=f"{path.stem}:")


# -- derivation and partitioning ----------------------------------------------


def derive_spacing(corpus: LabeledCorpus) -> LabeledCorpus:
    """Every punctuation label becomes a segment boundary ``_``."""
    if corpus.scheme.task is not Task.PUNCTUATION:
        raise WrongScheme(f"expected a punctuation corpus, got {corpus.scheme.task.value}")
    seqs = tuple(
        NormalizedSequence(
            s.chars,
            tuple(O if lab == O else SPACE_LABEL for lab in s.labels),
            id=s.id,
            source=s.source,
        )
        for s in corpus.sequences
    )
    return LabeledCorpus(SPACING, seqs, dict(corpus.provenance))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    test_fraction: float = 0.1
    val_fraction_of_train: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not math.isclose(self.train_fraction + self.test_fraction, 1.0):
            raise ValueError("train and test fractions must sum to 1")
        for name in ("train_fraction", "test_fraction", "val_fraction_of_train"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class Split:
    train: LabeledCorpus
    val: LabeledCorpus
    test: LabeledCorpus

    def manifest(self) -> str:
        """Text listing of sequence ids per partition."""
        lines = []
        for name in ("train", "val", "test"):
            part = getattr(self, name)
            lines.append(f"[{name}]\t{len(part)}")
            lines.extend(s.id for s in part.sequences)
        return "\n".join(lines) + "\n"


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(corpus: LabeledCorpus, spec: SplitSpec = SplitSpec()) -> Split:
    """Seeded sequence-level partition; validation is carved from the training share."""
    n = len(corpus)
    if n == 0:
        raise DatasetError("cannot split an empty corpus")
    order = list(range(n))
    random.Random(spec.seed).shuffle(order)
    n_test = _round_half_up(n * spec.test_fraction)
    n_val = _round_half_up((n - n_test) * spec.val_fraction_of_train)
    if n_test == 0 or n_val == 0:
        warnings.warn(
            DegenerateSplit(f"{n} sequences give test={n_test}, val={n_val}"), stacklevel=2
        )
    test_idx = sorted(order[:n_test])
    val_idx = sorted(order[n_test : n_test + n_val])
    train_idx = sorted(order[n_test + n_val :])
    return Split(corpus.subset(train_idx), corpus.subset(val_idx), corpus.subset(test_idx))


# -- statistics ---------------------------------------------------------------


def label_distribution(corpus: LabeledCorpus) -> dict[str, tuple[int, float]]:
    """Per-label character count and share of all characters."""
    counts = Counter(lab for s in corpus.sequences for lab in s.labels)
    total = sum(counts.values())
    return {
        lab: (counts[lab], counts[lab] / total if total else 0.0) for lab in corpus.scheme.labels
    }


def format_distribution(dist: dict[str, tuple[int, float]]) -> str:
    rows = [f"{'label':<8}{'count':>12}{'share':>10}"]
    for lab, (count, frac) in dist.items():
        rows.append(f"{label_name(lab):<8}{count:>12d}{frac:>10.4f}")
    return "\n".join(rows) + "\n"


def sequences_from_text(lines: Sequence[str], scheme: LabelScheme = PUNCTUATION) -> LabeledCorpus:
    """Build a corpus from already canonical lines, one sequence per line."""
    seqs = [extract_labels(line, scheme, id=str(i)) for i, line in enumerate(lines) if line]
    return LabeledCorpus(scheme, tuple(seqs))
