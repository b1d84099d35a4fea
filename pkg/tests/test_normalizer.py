import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import noise_alphabet, sequences
from hanpunc.normalizer import (
    ConsecutiveMarks,
    InvalidEncoding,
    LeadingMark,
    NormalizationRules,
    RawDocument,
    RuleFileError,
    UnbalancedBrackets,
    extract_labels,
    is_chinese_only,
    normalize,
    split_sequences,
)
from hanpunc.schemes import INVENTORY_SET, PUNCTUATION, NormalizedSequence


def test_semicolon_becomes_period():
    assert normalize("曰；學矣") == "曰。學矣"


def test_unmarked_text_is_untouched():
    assert normalize("學而時習之") == "學而時習之"


def test_opening_quote_after_character_becomes_comma():
    # 「 follows 曰 (not a mark) -> ，; 」 follows 。 -> deleted.
    assert normalize("子曰「學矣。」可也") == "子曰，學矣。可也"


def test_quote_after_colon_is_deleted():
    assert normalize("子曰：「學而時習之，不亦說乎？」") == "子曰:學而時習之，不亦說乎?"


def test_quote_before_mark_is_deleted():
    assert normalize("學矣」。可也") == "學矣。可也"


def test_nested_quotes_collapse():
    assert normalize("曰「吾聞『學矣』。」") == "曰，吾聞，學矣。"


def test_fullwidth_marks_map_to_ascii_labels():
    assert normalize("何也？命也！曰：") == "何也?命也!曰:"


def test_brackets_removed_with_contents():
    assert normalize("學（注文）矣。") == "學矣。"
    assert normalize("學（注〔又注〕文）矣。") == "學矣。"


def test_stray_closer_dropped():
    assert normalize("學）矣") == "學矣"


def test_unclosed_bracket_drops_to_end_and_warns():
    with pytest.warns(UnbalancedBrackets) as record:
        out = normalize(RawDocument("d1", "學矣。也（未完之文"))
    assert out == "學矣。也"
    assert record[0].message.offset == 4
    assert record[0].message.doc_id == "d1"


def test_book_title_marks_keep_title():
    assert normalize("讀《論語》。") == "讀論語。"


def test_leading_and_consecutive_marks():
    assert normalize("。學矣") == "學矣"
    assert normalize("學。，矣") == "學。矣"
    assert normalize("學，，，矣!!") == "學，矣!"


def test_whitespace_and_damage_markers_removed():
    assert normalize("學 而\n時□習之") == "學而時習之"


def test_foreign_sentences_dropped():
    assert normalize("學而時習之。이것은 한국어다。不亦說乎?") == "學而時習之。不亦說乎?"
    assert normalize("學而 hello。") == ""


def test_invalid_encoding():
    with pytest.raises(InvalidEncoding):
        RawDocument.from_bytes("x", b"\xff\xfe\x00")
    with pytest.raises(InvalidEncoding):
        normalize("學\udc80")


def test_is_chinese_only():
    assert is_chinese_only("學而時習之。")
    assert not is_chinese_only("學而 hello。")
    assert not is_chinese_only("學而시습。")
    assert is_chinese_only("𠀀𪚥")  # extension B
    assert is_chinese_only("")


@settings(max_examples=300)
@given(st.text(alphabet=noise_alphabet(), max_size=50))
def test_normalize_properties(text):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnbalancedBrackets)
        out = normalize(text)
        assert normalize(out) == out
    assert is_chinese_only(out)
    if out:
        assert out[0] not in INVENTORY_SET
    assert not any(a in INVENTORY_SET and b in INVENTORY_SET for a, b in zip(out, out[1:]))


def test_extract_labels():
    seq = extract_labels("子曰:學矣。")
    assert seq.chars == "子曰學矣"
    assert seq.labels == ("O", ":", "O", "。")
    assert extract_labels("學而時習之").labels == ("O",) * 5


def test_extract_labels_contract_violations():
    with pytest.raises(LeadingMark):
        extract_labels(":學")
    with pytest.raises(ConsecutiveMarks):
        extract_labels("學:。")


@given(sequences())
def test_extract_inverts_reinsertion(seq):
    assert extract_labels(seq.to_text()) == seq


def _seq(n, marks=()):
    labels = ["O"] * n
    for i in marks:
        labels[i] = "。"
    return NormalizedSequence("學" * n, tuple(labels), id="s")


def test_split_under_budget_is_unchanged():
    s = _seq(3)
    assert split_sequences(s, 512) == [s]


def test_split_after_last_label_in_window():
    parts = split_sequences(_seq(10, [6]), 10)
    assert [len(p) for p in parts] == [7, 3]
    assert parts[0].labels[-1] == "。"
    assert [p.id for p in parts] == ["s#0", "s#1"]


def test_split_at_budget_when_no_label():
    assert [len(p) for p in split_sequences(_seq(10), 7)] == [5, 5]


def test_split_rejects_tiny_budget():
    with pytest.raises(ValueError):
        split_sequences(_seq(3), 1)
    with pytest.raises(ValueError):
        split_sequences(_seq(3), 2)


@given(sequences(max_size=60), st.integers(3, 20))
def test_split_preserves_content(seq, max_len):
    parts = split_sequences(seq, max_len)
    assert "".join(p.chars for p in parts) == seq.chars
    assert sum((p.labels for p in parts), ()) == seq.labels
    assert all(1 <= len(p) <= max_len - 2 for p in parts)


def test_rule_file_round_trip():
    rules = NormalizationRules.default()
    again = NormalizationRules.parse(rules.dump())
    assert again == rules


def test_rule_file_errors():
    with pytest.raises(RuleFileError, match="line 1"):
        NormalizationRules.parse("replace\tU+FF1B\n")
    with pytest.raises(RuleFileError, match="unknown rule kind"):
        NormalizationRules.parse("swap\tU+FF1B\tU+3002\n")
    with pytest.raises(RuleFileError, match="expected U"):
        NormalizationRules.parse("delete\t；\n")
    with pytest.raises(RuleFileError, match="overlap"):
        NormalizationRules.parse("delete\tU+300C\nquote\tU+300C\n")
    with pytest.raises(RuleFileError, match="not a retained mark"):
        NormalizationRules.parse("replace\tU+FF1B\tU+0041\n")


def test_custom_rules_change_behaviour():
    rules = NormalizationRules.parse("replace\tU+FF1B\tU+FF0C\n")
    assert normalize("曰；學矣", rules) == "曰，學矣"
