"""Alignment contracts: word-id maps, projection, truncation."""

import numpy as np
import pytest

from mabsa.corpus import AspectAnnotation, Sample, word_tags
from mabsa.mate import decode_spans
from mabsa.token_align import (IGNORE_TAG, ToyWordPieceTokenizer,
                               project_word_tags, split_word)

TOK = ToyWordPieceTokenizer()


class TestTokenize:
    def test_two_single_piece_words(self):
        align = TOK.tokenize_with_alignment("the cat", 60)
        assert align.word_ids == [None, 0, 1, None]
        assert not align.truncated
        align.validate(60)

    def test_empty_text(self):
        align = TOK.tokenize_with_alignment("", 60)
        assert align.word_ids == [None, None]
        assert len(align) == 2

    def test_long_word_splits_into_consecutive_pieces(self):
        # 9-12 characters split into three pieces sharing one word id
        align = TOK.tokenize_with_alignment("incredible", 60)
        assert align.word_ids == [None, 0, 0, 0, None]
        assert align.pieces[1:4] == ["incr", "##edib", "##le"]

    def test_truncation_drops_whole_words(self):
        # pieces per word: 2, 1, 2; a budget of 4 content pieces keeps the
        # first two words whole and drops the third entirely
        align = TOK.tokenize_with_alignment("abcdefgh ij klmno", 6)
        assert align.truncated
        assert align.word_ids == [None, 0, 0, 1, None]

    def test_exact_fit_is_not_truncated(self):
        align = TOK.tokenize_with_alignment("abcdefgh ij klmno", 7)
        assert not align.truncated
        assert len(align) == 7

    def test_max_length_too_small(self):
        with pytest.raises(ValueError):
            TOK.tokenize_with_alignment("hello", 1)

    def test_deterministic(self):
        a = TOK.tokenize_with_alignment("same input twice", 60)
        b = TOK.tokenize_with_alignment("same input twice", 60)
        assert a.subword_ids == b.subword_ids
        assert a.word_ids == b.word_ids

    def test_split_word_rule(self):
        assert split_word("ab") == ["ab"]
        assert split_word("abcdef") == ["abcd", "##ef"]
        assert split_word("abcdefghij") == ["abcd", "##efgh", "##ij"]


class TestProjectWordTags:
    def test_projection_marks_continuations_ignored(self):
        align = TOK.tokenize_with_alignment("abcdef gh", 60)
        # word 0 has two pieces, word 1 one piece
        out = project_word_tags([1, 0], align)
        assert out == [IGNORE_TAG, 1, IGNORE_TAG, 0, IGNORE_TAG]

    def test_all_outside(self):
        align = TOK.tokenize_with_alignment("aa bb cc", 60)
        out = project_word_tags([0, 0, 0], align)
        firsts = [t for t in out if t != IGNORE_TAG]
        assert firsts == [0, 0, 0]

    def test_round_trip_through_decoder(self):
        align = TOK.tokenize_with_alignment("abcdefgh ij", 60)
        out = project_word_tags([1, 2], align)
        assert decode_spans(out, align.word_ids).spans == [(0, 1)]

    def test_word_id_out_of_range(self):
        align = TOK.tokenize_with_alignment("aa bb", 60)
        with pytest.raises(ValueError, match="alignment"):
            project_word_tags([0], align)


def test_gold_round_trip_without_truncation():
    """Tags projected to subwords then decoded recover the gold spans."""
    rng = np.random.default_rng(99)
    for i in range(200):
        n = int(rng.integers(1, 10))
        words = ["w" * int(rng.integers(1, 10)) for _ in range(n)]
        text = " ".join(words)
        # one random span
        b = int(rng.integers(0, n))
        e = int(rng.integers(b, n))
        sample = Sample(f"s{i}", text, None,
                        [AspectAnnotation(b, e, " ".join(words[b:e + 1]), "neutral")])
        align = TOK.tokenize_with_alignment(text, 200)
        projected = project_word_tags(word_tags(sample), align)
        assert decode_spans(projected, align.word_ids).spans == [(b, e)]
