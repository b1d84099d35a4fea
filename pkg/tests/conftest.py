from __future__ import annotations

import random

import pytest
from hypothesis import strategies as st

from hanpunc.dataset import LabeledCorpus
from hanpunc.normalizer import default_rules
from hanpunc.schemes import INVENTORY, PUNCTUATION, SPACING, LabelScheme, NormalizedSequence

HAN = "學而時習之不亦說乎有朋自遠方來樂人知慍君子曰何如孰誰也矣焉哉"


def noise_alphabet() -> str:
    rules = default_rules()
    extras = set(rules.replace_map) | set(rules.delete_set) | set(rules.quote_marks)
    extras |= {c for pair in rules.bracket_pairs for c in pair}
    return HAN + "".join(INVENTORY) + "".join(sorted(extras)) + " \n\t　ab한글0"


def mark_laced(rng: random.Random, max_len: int = 40) -> str:
    alphabet = noise_alphabet()
    weights = [6 if ch in HAN else 1 for ch in alphabet]
    return "".join(rng.choices(alphabet, weights, k=rng.randint(0, max_len)))


def random_sequence(rng: random.Random, scheme: LabelScheme, max_len: int = 20, p_mark: float = 0.2) -> NormalizedSequence:
    n = rng.randint(1, max_len)
    chars = "".join(rng.choice(HAN) for _ in range(n))
    labels = tuple(rng.choice(scheme.marks) if rng.random() < p_mark else "O" for _ in range(n))
    return NormalizedSequence(chars, labels)


def random_corpus(rng: random.Random, scheme: LabelScheme = PUNCTUATION, max_seqs: int = 8) -> LabeledCorpus:
    return LabeledCorpus(scheme, tuple(random_sequence(rng, scheme) for _ in range(rng.randint(0, max_seqs))))


@st.composite
def sequences(draw, scheme: LabelScheme = PUNCTUATION, min_size: int = 1, max_size: int = 30):
    chars = draw(st.text(alphabet=HAN, min_size=min_size, max_size=max_size))
    labels = draw(st.lists(st.sampled_from(scheme.labels), min_size=len(chars), max_size=len(chars)))
    return NormalizedSequence(chars, tuple(labels))


@st.composite
def corpora(draw, scheme: LabelScheme = PUNCTUATION):
    seqs = draw(st.lists(sequences(scheme), max_size=6))
    return LabeledCorpus(scheme, tuple(seqs))


@pytest.fixture
def rng():
    return random.Random(1234)


__all__ = ["HAN", "PUNCTUATION", "SPACING"]


def biased_checkpoint(label: str = "O", scheme: LabelScheme = PUNCTUATION, text: str = HAN, max_len: int = 32):
    """A checkpoint whose classifier bias makes it always predict ``label``."""
    import torch

    from hanpunc.checkpoint import Checkpoint
    from hanpunc.model import ModelConfig, init
    from hanpunc.tokenizer import build_vocab

    vocab = build_vocab([text])
    cfg = ModelConfig(vocab_size=len(vocab), num_labels=len(scheme), max_len=max_len, dropout=0.0)
    state = init(cfg).state_dict()
    bias = torch.zeros(len(scheme))
    bias[scheme.index(label)] = 100.0
    state["classifier.bias"] = bias
    return Checkpoint(cfg, state, vocab, scheme)


ACCEPTANCE: list[str] = []


def report_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
