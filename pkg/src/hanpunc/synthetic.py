"""Seeded synthetic hanmun-style corpora for smoke tests and demos."""

from __future__ import annotations

import random

from .dataset import LabeledCorpus
from .normalizer import extract_labels
from .schemes import PUNCTUATION, NormalizedSequence, O

# Frequent classical characters, none of which is used as a cue below.
FILLER = (
    "天地人君臣民國家王公侯卿大夫士子父母兄弟夫婦朋友事物心性情志道德仁義禮智信"
    "忠孝學問文章詩書易春秋經史山川水火木金土日月星辰風雨雪霜春夏秋冬東西南北"
    "上下左右前後內外古今長短高低遠近多少大小輕重生死存亡治亂得失善惡是非成敗"
    "利害安危賢愚貴賤貧富吉凶言行知能見聞思愛惡欲求用行止來往出入進退開閉起居"
    "百千萬年時歲官兵民賦刑法令政教禮樂車馬衣食宮室城郭田野草林花鳥魚獸龍虎"
)

SPEECH = "曰"
QUESTION_END = "乎"


def cue_grammar(n: int, seed: int = 0, min_len: int = 8, max_len: int = 40) -> LabeledCorpus:
    """':' always follows 曰 and '。' always follows 乎; every other character is O."""
    rng = random.Random(seed)
    seqs = []
    for k in range(n):
        length = rng.randint(min_len, max_len)
        chars, labels = [], []
        for _ in range(length):
            r = rng.random()
            if r < 0.08:
                chars.append(SPEECH)
                labels.append(":")
            elif r < 0.16:
                chars.append(QUESTION_END)
                labels.append("。")
            else:
                chars.append(rng.choice(FILLER))
                labels.append(O)
        seqs.append(NormalizedSequence("".join(chars), tuple(labels), id=f"cue{k}"))
    return LabeledCorpus(PUNCTUATION, tuple(seqs))


# Clause-final particles and the mark that closes the clause.
_ENDINGS = (
    ("也", "。"),
    ("矣", "。"),
    ("焉", "。"),
    ("乎", "?"),
    ("哉", "!"),
    ("而", "，"),
    ("則", "，"),
    ("之", "，"),
)
_QUESTION_WORDS = "如何孰誰"
_SPEAKERS = ("子", "孟子", "王", "公", "臣")


def classical_style(n: int, seed: int = 0, max_chars: int = 120) -> LabeledCorpus:
    """Sentences shaped like punctuated classical prose.

    Speech opens with ``X曰:``; clauses of two to six filler characters end
    in a particle whose mark follows it (也矣焉 → 。, 乎 → ?, 哉 → !,
    而則之 → ，); questions carry 如何孰誰; short noun lists are separated
    by 、.
    """
    rng = random.Random(seed)
    docs = []
    for k in range(n):
        parts: list[str] = []
        budget = rng.randint(max_chars // 3, max_chars)
        while sum(len(p) for p in parts) < budget:
            if rng.random() < 0.25:
                parts.append(rng.choice(_SPEAKERS) + "曰:")
            if rng.random() < 0.15:
                items = [rng.choice(FILLER) + rng.choice(FILLER) for _ in range(rng.randint(2, 4))]
                parts.append("、".join(items) + rng.choice("皆各並") + "可，")
            particle, mark = rng.choice(_ENDINGS)
            body = "".join(rng.choice(FILLER) for _ in range(rng.randint(2, 6)))
            if mark == "?":
                body = rng.choice(_QUESTION_WORDS) + body
            parts.append(body + particle + mark)
        seq = extract_labels("".join(parts), PUNCTUATION, id=f"doc{k}")
        docs.append(
            NormalizedSequence(seq.chars[:max_chars], seq.labels[:max_chars], id=seq.id)
        )
    return LabeledCorpus(PUNCTUATION, tuple(docs))
