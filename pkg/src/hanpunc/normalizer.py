"""Canonicalize digitized hanmun text to the six-mark punctuation inventory.

The canonical form contains only CJK ideographs and the marks
``! : ? ， 、 。``, never starts with a mark and never has two marks in a
row, so every mark can be read as the label of the character before it.
"""

from __future__ import annotations

import enum
import logging
import re
import unicodedata
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .schemes import (
    COMMA,
    INVENTORY,
    INVENTORY_SET,
    LabelScheme,
    NormalizedSequence,
    O,
    PUNCTUATION,
)

logger = logging.getLogger(__name__)

SENTENCE_FINAL = frozenset("。!?")

# CJK Unified Ideographs with every extension block, plus the two
# compatibility blocks (Korean sources use U+F900.. heavily).
_CJK_RANGES = (
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2FA1F),
    (0x30000, 0x323AF),
)


class NormalizationError(ValueError):
    pass


class InvalidEncoding(NormalizationError):
    pass


class LeadingMark(NormalizationError):
    pass


class ConsecutiveMarks(NormalizationError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(message)
        self.offset = offset


class RuleFileError(ValueError):
    pass


class UnbalancedBrackets(UserWarning):
    """An opening bracket never closed; everything after it was dropped."""

    def __init__(self, offset: int, doc_id: str = "") -> None:
        self.offset = offset
        self.doc_id = doc_id
        where = f" in {doc_id!r}" if doc_id else ""
        super().__init__(f"unclosed bracket at offset {offset}{where}; dropped to end of text")


class Source(str, enum.Enum):
    AJD = "AJD"
    DRC = "DRC"
    OTHER = "OTHER"


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    source: Source = Source.OTHER

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        object.__setattr__(self, "source", Source(self.source))

    @classmethod
    def from_bytes(cls, id: str, data: bytes, source: Source | str = Source.OTHER) -> RawDocument:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidEncoding(f"{id}: not UTF-8 at byte {exc.start}") from exc
        return cls(id, text, Source(source))


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


@dataclass(frozen=True)
class NormalizationRules:
    replace_map: dict[str, str] = field(default_factory=dict)
    delete_set: frozenset[str] = frozenset()
    bracket_pairs: tuple[tuple[str, str], ...] = ()
    quote_marks: frozenset[str] = frozenset()
    target_inventory: tuple[str, ...] = INVENTORY

    def __post_init__(self) -> None:
        inventory = set(self.target_inventory)
        if inventory != INVENTORY_SET:
            raise RuleFileError("target inventory must be the six retained marks")
        brackets = {c for pair in self.bracket_pairs for c in pair}
        groups = {
            "delete": set(self.delete_set),
            "quote": set(self.quote_marks),
            "bracket": brackets,
            "inventory": inventory,
        }
        names = list(groups)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                both = groups[a] & groups[b]
                if both:
                    raise RuleFileError(f"{a} and {b} overlap on {_fmt(both)}")
        for src, dst in self.replace_map.items():
            if len(src) != 1 or len(dst) != 1:
                raise RuleFileError("replace entries map one codepoint to one codepoint")
            if src in inventory or is_cjk(src):
                raise RuleFileError(f"cannot replace {_fmt({src})}")
            if dst not in inventory and dst not in self.quote_marks:
                raise RuleFileError(f"replacement target {_fmt({dst})} is not a retained mark")
        openers = [o for o, _ in self.bracket_pairs]
        if len(set(openers)) != len(openers):
            raise RuleFileError("duplicate bracket opener")

    @property
    def openers(self) -> dict[str, str]:
        return dict(self.bracket_pairs)

    @property
    def closers(self) -> frozenset[str]:
        return frozenset(c for _, c in self.bracket_pairs)

    @classmethod
    def parse(cls, text: str) -> NormalizationRules:
        """Parse a rule file: ``kind<TAB>from[<TAB>to]`` with ``U+XXXX`` codepoints."""
        replace: dict[str, str] = {}
        delete: set[str] = set()
        brackets: list[tuple[str, str]] = []
        quotes: set[str] = set()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            kind, args = parts[0].strip().lower(), [p.strip() for p in parts[1:] if p.strip()]
            try:
                cps = [_parse_codepoint(a) for a in args]
            except ValueError as exc:
                raise RuleFileError(f"line {lineno}: {exc}") from None
            if kind in ("replace", "bracket"):
                if len(cps) != 2:
                    raise RuleFileError(f"line {lineno}: {kind} takes two codepoints")
                if kind == "replace":
                    replace[cps[0]] = cps[1]
                else:
                    brackets.append((cps[0], cps[1]))
            elif kind in ("delete", "quote"):
                if len(cps) != 1:
                    raise RuleFileError(f"line {lineno}: {kind} takes one codepoint")
                (delete if kind == "delete" else quotes).add(cps[0])
            else:
                raise RuleFileError(f"line {lineno}: unknown rule kind {kind!r}")
        return cls(replace, frozenset(delete), tuple(brackets), frozenset(quotes))

    @classmethod
    def from_file(cls, path: str | Path) -> NormalizationRules:
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> NormalizationRules:
        text = resources.files("hanpunc.data").joinpath("default_rules.tsv").read_text("utf-8")
        return cls.parse(text)

    def dump(self) -> str:
        lines = [f"replace\t{_cp(a)}\t{_cp(b)}" for a, b in sorted(self.replace_map.items())]
        lines += [f"bracket\t{_cp(a)}\t{_cp(b)}" for a, b in self.bracket_pairs]
        lines += [f"quote\t{_cp(c)}" for c in sorted(self.quote_marks)]
        lines += [f"delete\t{_cp(c)}" for c in sorted(self.delete_set)]
        return "\n".join(lines) + "\n"


def _parse_codepoint(token: str) -> str:
    m = re.fullmatch(r"[Uu]\+([0-9A-Fa-f]{4,6})", token)
    if not m:
        raise ValueError(f"expected U+XXXX, got {token!r}")
    return chr(int(m.group(1), 16))


def _cp(ch: str) -> str:
    return "U+%04X" % ord(ch)


def _fmt(chars: Iterable[str]) -> str:
    return ", ".join(_cp(c) for c in sorted(chars))


def _is_noise(ch: str, rules: NormalizationRules) -> bool:
    """True when step four will remove ``ch``."""
    if ch in rules.delete_set:
        return True
    if ch in INVENTORY_SET or is_cjk(ch):
        return False
    return unicodedata.category(ch)[0] in "PSZC"


def _delete_brackets(text: str, rules: NormalizationRules, doc_id: str) -> str:
    openers, closers = rules.openers, rules.closers
    out: list[str] = []
    stack: list[str] = []
    start = 0
    for i, ch in enumerate(text):
        if ch in openers:
            if not stack:
                start = i
            stack.append(openers[ch])
        elif ch in closers:
            if ch in stack:
                while stack.pop() != ch:
                    pass
            # A stray closer outside any span is dropped on its own.
        elif not stack:
            out.append(ch)
    if stack:
        warnings.warn(UnbalancedBrackets(start, doc_id), stacklevel=3)
    return "".join(out)


def _resolve_quotes(text: str, rules: NormalizationRules) -> str:
    out: list[str] = []
    for i, ch in enumerate(text):
        if ch not in rules.quote_marks:
            out.append(ch)
            continue
        prev = next((c for c in reversed(out) if not _is_noise(c, rules)), None)
        nxt = next(
            (c for c in text[i + 1 :] if c not in rules.quote_marks and not _is_noise(c, rules)),
            None,
        )
        # Delete next to another mark, otherwise keep only the segmenting role.
        if prev in INVENTORY_SET or nxt in INVENTORY_SET:
            continue
        out.append(COMMA)
    return "".join(out)


def _drop_foreign_sentences(text: str) -> str:
    kept: list[str] = []
    sentence: list[str] = []
    for ch in text:
        sentence.append(ch)
        if ch in SENTENCE_FINAL:
            kept.append("".join(sentence))
            sentence = []
    if sentence:
        kept.append("".join(sentence))
    out = [s for s in kept if is_chinese_only(s)]
    if len(out) != len(kept):
        logger.debug("dropped %d non-Chinese sentence(s)", len(kept) - len(out))
    return "".join(out)


def collapse_marks(text: str) -> str:
    """Strip leading marks and keep only the first mark of each run."""
    out: list[str] = []
    for ch in text:
        if ch in INVENTORY_SET and (not out or out[-1] in INVENTORY_SET):
            continue
        out.append(ch)
    return "".join(out)


def normalize(doc: RawDocument | str, rules: NormalizationRules | None = None) -> str:
    """Return the canonical punctuated form of ``doc``.

    Steps run in order: codepoint replacement, bracket-span deletion, quote
    resolution, deletion of the delete set and of any other non-ideograph
    punctuation, symbols or whitespace, then mark-run collapsing. Sentences
    that still contain non-ideograph letters or digits (Hangul, Latin, ...)
    are dropped whole.
    """
    if isinstance(doc, str):
        doc_id, text = "", doc
    else:
        doc_id, text = doc.id, doc.text
    rules = rules or default_rules()
    try:
        text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise InvalidEncoding(f"unencodable codepoint at offset {exc.start}") from None

    text = text.translate(str.maketrans(rules.replace_map))
    text = _delete_brackets(text, rules, doc_id)
    text = _resolve_quotes(text, rules)
    text = "".join(ch for ch in text if not _is_noise(ch, rules))
    text = collapse_marks(text)
    return _drop_foreign_sentences(text)


_DEFAULT_RULES: NormalizationRules | None = None


def default_rules() -> NormalizationRules:
    global _DEFAULT_RULES
    if _DEFAULT_RULES is None:
        _DEFAULT_RULES = NormalizationRules.default()
    return _DEFAULT_RULES


def is_chinese_only(text: str) -> bool:
    """True iff every non-mark codepoint is a CJK ideograph."""
    return all(ch in INVENTORY_SET or is_cjk(ch) for ch in text)


def extract_labels(
    text: str, scheme: LabelScheme = PUNCTUATION, *, id: str = "", source: str = "OTHER"
) -> NormalizedSequence:
    """Split canonical text into characters and the mark following each one."""
    marks = set(scheme.marks)
    chars: list[str] = []
    labels: list[str] = []
    for i, ch in enumerate(text):
        if ch in marks:
            if not chars:
                raise LeadingMark(f"text starts with mark {ch!r}")
            if labels[-1] != O:
                raise ConsecutiveMarks(f"mark {ch!r} follows another mark at offset {i}", i)
            labels[-1] = ch
        else:
            chars.append(ch)
            labels.append(O)
    return NormalizedSequence("".join(chars), tuple(labels), id=id, source=source)


def split_sequences(seq: NormalizedSequence, max_len: int = 512) -> list[NormalizedSequence]:
    """Cut ``seq`` into pieces of at most ``max_len - 2`` characters.

    Each cut falls right after the last labeled character inside the budget
    window, or at the window edge when the window holds no label.
    """
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    budget = max_len - 2
    if len(seq) <= budget:
        return [seq]
    if budget == 0:
        raise ValueError("max_len 2 leaves no room for characters")
    pieces: list[tuple[int, int]] = []
    start, n = 0, len(seq)
    while n - start > budget:
        end = start + budget
        cut = next((i + 1 for i in range(end - 1, start - 1, -1) if seq.labels[i] != O), end)
        pieces.append((start, cut))
        start = cut
    pieces.append((start, n))
    return [
        NormalizedSequence(
            seq.chars[a:b],
            seq.labels[a:b],
            id=f"{seq.id}#{k}" if seq.id else str(k),
            source=seq.source,
        )
        for k, (a, b) in enumerate(pieces)
    ]
