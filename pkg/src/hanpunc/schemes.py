"""Label schemes and the labeled-sequence record shared across modules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

O = "O"
SPACE_LABEL = "_"

# Retained mark inventory, in label order after O.
EXCLAMATION = "!"
COLON = ":"
QUESTION = "?"
COMMA = "，"
IDEOGRAPHIC_COMMA = "、"
IDEOGRAPHIC_PERIOD = "。"

INVENTORY: tuple[str, ...] = (
    EXCLAMATION,
    COLON,
    QUESTION,
    COMMA,
    IDEOGRAPHIC_COMMA,
    IDEOGRAPHIC_PERIOD,
)
INVENTORY_SET = frozenset(INVENTORY)


class Task(str, enum.Enum):
    PUNCTUATION = "punctuation"
    SPACING = "spacing"


@dataclass(frozen=True)
class LabelScheme:
    task: Task
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.labels or self.labels[0] != O:
            raise ValueError("label O must sit at index 0")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in scheme")

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    @property
    def marks(self) -> tuple[str, ...]:
        """Every label except O."""
        return self.labels[1:]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @classmethod
    def for_task(cls, task: Task | str) -> LabelScheme:
        task = Task(task)
        return PUNCTUATION if task is Task.PUNCTUATION else SPACING


PUNCTUATION = LabelScheme(Task.PUNCTUATION, (O, *INVENTORY))
SPACING = LabelScheme(Task.SPACING, (O, SPACE_LABEL))


def label_name(label: str) -> str:
    """Stable ASCII name for a label: ``O``, ``_`` or ``U+XXXX``."""
    if label in (O, SPACE_LABEL):
        return label
    return "U+%04X" % ord(label)


@dataclass(frozen=True)
class NormalizedSequence:
    """Characters with one label each; the label is the mark after the char.

    ``id`` and ``source`` are bookkeeping and do not take part in equality.
    """

    chars: str
    labels: tuple[str, ...]
    id: str = field(default="", compare=False)
    source: str = field(default="OTHER", compare=False)

    def __post_init__(self) -> None:
        if len(self.chars) != len(self.labels):
            raise ValueError(
                f"{len(self.chars)} characters but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.chars)

    def to_text(self, space: str = " ") -> str:
        """Re-insert labels as marks after their characters."""
        out = []
        for ch, lab in zip(self.chars, self.labels):
            out.append(ch)
            if lab == SPACE_LABEL:
                out.append(space)
            elif lab != O:
                out.append(lab)
        return "".join(out)
