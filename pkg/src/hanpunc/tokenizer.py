"""One-character-one-token vocabulary with corpus-driven extension."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .schemes import LabelScheme, NormalizedSequence

logger = logging.getLogger(__name__)

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIALS = (PAD, UNK, CLS, SEP)
PAD_ID, UNK_ID, CLS_ID, SEP_ID = range(4)
IGNORE_INDEX = -100
REPLACEMENT_CHAR = "�"


class TooLong(ValueError):
    pass


class IdOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    num_added: int = field(default=0, compare=False)
    """How many tokens came from the corpus rather than the base list."""

    def __post_init__(self) -> None:
        if self.tokens[:4] != SPECIALS:
            raise ValueError("vocab must start with PAD, UNK, CLS, SEP")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate vocab entries")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def id(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        if not 0 <= idx < len(self.tokens):
            raise IdOutOfRange(f"id {idx} outside vocab of size {len(self.tokens)}")
        return self.tokens[idx]

    def to_text(self) -> str:
        return "".join(t + "\n" for t in self.tokens)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_text().encode("utf-8"))

    @classmethod
    def from_text(cls, text: str) -> Vocab:
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines))

    @classmethod
    def load(cls, path: str | Path) -> Vocab:
        return cls.from_text(Path(path).read_bytes().decode("utf-8"))


def build_vocab(
    corpora: Iterable[Iterable[NormalizedSequence] | str],
    base: Sequence[str] | None = None,
) -> Vocab:
    """Specials, then ``base`` in order, then unseen corpus characters by first appearance."""
    tokens = list(SPECIALS)
    seen = set(tokens)
    for tok in base or ():
        if tok not in seen:
            seen.add(tok)
            tokens.append(tok)
    n_base = len(tokens)
    for corpus in corpora:
        texts = [corpus] if isinstance(corpus, str) else (s.chars for s in corpus)
        for text in texts:
            for ch in text:
                if ch not in seen:
                    seen.add(ch)
                    tokens.append(ch)
    added = len(tokens) - n_base
    logger.info("vocab: %d tokens, %d added beyond base", len(tokens), added)
    return Vocab(tuple(tokens), num_added=added)


class Encoding(NamedTuple):
    ids: list[int]
    attention_mask: list[int]
    label_ids: list[int]


def encode_chars(chars: str, vocab: Vocab, max_len: int | None = None) -> Encoding:
    """Encode bare characters; every label slot is ``IGNORE_INDEX``."""
    n = len(chars)
    if max_len is None:
        max_len = n + 2
    if n > max_len - 2:
        raise TooLong(f"{n} characters exceed budget {max_len - 2}")
    pad = max_len - n - 2
    ids = [CLS_ID, *(vocab.id(c) for c in chars), SEP_ID] + [PAD_ID] * pad
    mask = [1] * (n + 2) + [0] * pad
    return Encoding(ids, mask, [IGNORE_INDEX] * max_len)


def encode(
    seq: NormalizedSequence, vocab: Vocab, max_len: int | None, scheme: LabelScheme
) -> Encoding:
    """``[CLS] chars [SEP] [PAD]...`` with labels aligned to the characters."""
    enc = encode_chars(seq.chars, vocab, max_len)
    label_ids = list(enc.label_ids)
    for i, lab in enumerate(seq.labels, start=1):
        label_ids[i] = scheme.index(lab)
    return Encoding(enc.ids, enc.attention_mask, label_ids)


def decode(ids: Iterable[int], vocab: Vocab) -> str:
    out = []
    for idx in ids:
        tok = vocab.token(int(idx))
        if idx == UNK_ID:
            out.append(REPLACEMENT_CHAR)
        elif idx >= len(SPECIALS):
            out.append(tok)
    return "".join(out)
