"""Word/subword alignment between annotations and model inputs.

Annotations index words; encoders consume subwords. A ``TokenAlignment``
records, for every subword position, which word it came from (or None for
the sequence-start/sequence-end specials), which is what both tag
projection and span decoding key on: only the first subword of each word
is decision-bearing.

The toy tokenizer is a deterministic rule-based splitter so the whole
pipeline runs without downloaded vocabularies: a word is cut into chunks
of at most ``PIECE_LEN`` characters, continuation chunks carry a ``##``
marker, and every piece hashes (crc32) into a fixed-size id space.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

# Sentinel excluded from the tagging loss; assigned to continuation
# subwords and special positions by project_word_tags.
IGNORE_TAG = -100

PIECE_LEN = 4

CLS_ID, SEP_ID, PAD_ID, UNK_ID = 0, 1, 2, 3
_NUM_SPECIALS = 4


@dataclass
class TokenAlignment:
    """Subword ids plus the word-id map and attention mask, equal lengths."""

    subword_ids: list[int]
    word_ids: list[int | None]
    attention_mask: list[int]
    truncated: bool = False
    pieces: list[str] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.subword_ids)

    def validate(self, max_length: int | None = None):
        n = len(self.subword_ids)
        if not (len(self.word_ids) == len(self.attention_mask) == n):
            raise ValueError("alignment lists have unequal lengths")
        if max_length is not None and n > max_length:
            raise ValueError(f"alignment length {n} exceeds max_length {max_length}")
        if n < 2 or self.word_ids[0] is not None:
            raise ValueError("position 0 must be the sequence-start special")
        content = [i for i, m in enumerate(self.attention_mask) if m == 1]
        if not content or self.word_ids[content[-1]] is not None:
            raise ValueError("final content position must be the sequence-end special")
        last = -1
        for w in self.word_ids:
            if w is None:
                continue
            if w < last:
                raise ValueError("word ids of content positions must be non-decreasing")
            last = w


def split_word(word: str) -> list[str]:
    """Deterministic subword split: chunks of PIECE_LEN chars, '##' continuations."""
    pieces = [word[i:i + PIECE_LEN] for i in range(0, len(word), PIECE_LEN)]
    return [pieces[0]] + ["##" + p for p in pieces[1:]]


class ToyWordPieceTokenizer:
    """Rule-based tokenizer resource; stateless and safe to share.

    Any object with the same ``tokenize_with_alignment(text, max_length)``
    surface can substitute for it (the pretrained backend adapts a real
    subword vocabulary to this interface).
    """

    def __init__(self, vocab_size: int = 1024):
        if vocab_size <= _NUM_SPECIALS:
            raise ValueError("vocab_size must exceed the 4 reserved specials")
        self.vocab_size = vocab_size

    def piece_id(self, piece: str) -> int:
        return _NUM_SPECIALS + zlib.crc32(piece.encode("utf-8")) % (
            self.vocab_size - _NUM_SPECIALS)

    def tokenize_with_alignment(self, text: str, max_length: int = 60) -> TokenAlignment:
        """Tokenize and align; truncation drops whole trailing words.

        max_length must leave room for the two special tokens.
        """
        if max_length < 2:
            raise ValueError("max_length must be >= 2")
        words = text.split()
        per_word = [split_word(w) for w in words]

        budget = max_length - 2
        kept = 0
        used = 0
        for pieces in per_word:
            if used + len(pieces) > budget:
                break
            used += len(pieces)
            kept += 1
        truncated = kept < len(words)

        subword_ids = [CLS_ID]
        word_ids: list[int | None] = [None]
        pieces_flat = ["[CLS]"]
        for w in range(kept):
            for piece in per_word[w]:
                subword_ids.append(self.piece_id(piece))
                word_ids.append(w)
                pieces_flat.append(piece)
        subword_ids.append(SEP_ID)
        word_ids.append(None)
        pieces_flat.append("[SEP]")

        return TokenAlignment(subword_ids=subword_ids, word_ids=word_ids,
                              attention_mask=[1] * len(subword_ids),
                              truncated=truncated, pieces=pieces_flat)


def project_word_tags(tags: list[int], align: TokenAlignment) -> list[int]:
    """Spread word-level tags onto subword positions.

    The first subword of word w gets tags[w]; continuation subwords and
    special positions get IGNORE_TAG so the loss skips them.
    """
    content_words = [w for w in align.word_ids if w is not None]
    if content_words and max(content_words) >= len(tags):
        raise ValueError(
            f"alignment references word {max(content_words)} but only "
            f"{len(tags)} tags were given")
    out = []
    prev: int | None = None
    for w in align.word_ids:
        if w is None:
            out.append(IGNORE_TAG)
            prev = None
            continue
        out.append(tags[w] if w != prev else IGNORE_TAG)
        prev = w
    return out
