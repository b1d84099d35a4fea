import pytest
from hypothesis import given

from conftest import sequences
from hanpunc.schemes import PUNCTUATION, NormalizedSequence
from hanpunc.tokenizer import (
    CLS_ID,
    IGNORE_INDEX,
    PAD_ID,
    SEP_ID,
    SPECIALS,
    UNK_ID,
    IdOutOfRange,
    TooLong,
    Vocab,
    build_vocab,
    decode,
    encode,
)


def test_specials_fixed():
    assert SPECIALS == ("[PAD]", "[UNK]", "[CLS]", "[SEP]")
    assert (PAD_ID, UNK_ID, CLS_ID, SEP_ID) == (0, 1, 2, 3)


def test_build_vocab_base_then_corpus():
    v = build_vocab(["子學"], base=["子", "曰"])
    assert v.tokens == (*SPECIALS, "子", "曰", "學")
    assert v.num_added == 1


def test_build_vocab_empty():
    v = build_vocab([], base=[])
    assert len(v) == 4
    assert v.num_added == 0


def test_build_vocab_deterministic():
    corpus = [NormalizedSequence("學而時習之學", ("O",) * 6)]
    assert build_vocab([corpus]).tokens == build_vocab([corpus]).tokens
    assert build_vocab([corpus]).tokens[4:] == tuple("學而時習之")


def test_encode_layout():
    v = build_vocab(["子曰"])
    enc = encode(NormalizedSequence("子曰", ("O", ":")), v, 6, PUNCTUATION)
    assert enc.ids == [CLS_ID, v.id("子"), v.id("曰"), SEP_ID, PAD_ID, PAD_ID]
    assert enc.attention_mask == [1, 1, 1, 1, 0, 0]
    assert enc.label_ids == [IGNORE_INDEX, 0, 2, IGNORE_INDEX, IGNORE_INDEX, IGNORE_INDEX]


def test_encode_oov_and_too_long():
    v = build_vocab(["子"])
    enc = encode(NormalizedSequence("子學", ("O", "。")), v, None, PUNCTUATION)
    assert enc.ids[2] == UNK_ID
    assert enc.label_ids[2] == PUNCTUATION.index("。")
    with pytest.raises(TooLong):
        encode(NormalizedSequence("子學", ("O", "O")), v, 3, PUNCTUATION)


def test_decode():
    v = build_vocab(["子曰"])
    assert decode([PAD_ID] * 4, v) == ""
    assert decode([4], v) == "子"
    assert decode([CLS_ID, UNK_ID, SEP_ID], v) == "�"
    with pytest.raises(IdOutOfRange):
        decode([99], v)


@given(sequences())
def test_round_trip_and_label_alignment(seq):
    v = build_vocab([seq.chars])
    enc = encode(seq, v, len(seq) + 5, PUNCTUATION)
    assert decode(enc.ids, v) == seq.chars
    real = [i for i, (m, t) in enumerate(zip(enc.attention_mask, enc.ids)) if m and t not in (CLS_ID, SEP_ID)]
    labelled = [i for i, lab in enumerate(enc.label_ids) if lab != IGNORE_INDEX]
    assert real == labelled


def test_vocab_file_round_trip(tmp_path):
    v = build_vocab(["學而時習之"])
    path = tmp_path / "vocab.txt"
    v.save(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[:4] == list(SPECIALS)
    assert lines[4] == "學"
    back = Vocab.load(path)
    assert back == v
    assert back.sha256 == v.sha256


def test_vocab_rejects_bad_layout():
    with pytest.raises(ValueError):
        Vocab(("a", "b"))
    with pytest.raises(ValueError):
        Vocab((*SPECIALS, "a", "a"))
