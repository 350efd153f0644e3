"""Aspect term extraction: token tagging, its loss, and span decoding.

Tags use the fixed integer coding O=0, B=1, I=2. Prediction is a plain
per-position argmax over a linear+softmax head (no transition model), and
the decoder turns subword-level tag sequences back into word-index spans.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, parameter
from .corpus import Sample, TAG_B, TAG_I
from .encoders import TextFeatures
from .token_align import IGNORE_TAG, TokenAlignment

NUM_TAGS = 3


@dataclass
class TagLogits:
    """Raw per-position scores over (O, B, I) plus the producing alignment."""

    logits: Tensor
    alignment: TokenAlignment

    @property
    def probs(self) -> np.ndarray:
        return self.logits.softmax(axis=-1).data

    def argmax_tags(self) -> list[int]:
        return [int(t) for t in self.logits.data.argmax(axis=-1)]


@dataclass
class SpanSet:
    """Non-overlapping (begin_word, end_word) spans, sorted by begin."""

    spans: list[tuple[int, int]]

    def __iter__(self):
        return iter(self.spans)

    def __len__(self):
        return len(self.spans)


class TagHead:
    """Linear tag classifier over encoder rows."""

    def __init__(self, hidden_size: int, rng: np.random.Generator):
        self.w = parameter(rng.normal(0.0, 1.0 / np.sqrt(hidden_size),
                                      (hidden_size, NUM_TAGS)))
        self.b = parameter(np.zeros(NUM_TAGS))

    def tag_tokens(self, features: TextFeatures) -> TagLogits:
        if features.alignment is None:
            raise ValueError("text features carry no alignment")
        return TagLogits(logits=features.tokens @ self.w + self.b,
                         alignment=features.alignment)

    def params(self) -> dict[str, Tensor]:
        return {"w": self.w, "b": self.b}


def aspect_label_loss(logits: TagLogits, gold: list[int]) -> Tensor:
    """Mean negative log-likelihood over supervised positions.

    Positions tagged IGNORE_TAG contribute nothing; their logits may change
    freely without moving the loss.
    """
    if len(gold) != logits.logits.shape[0]:
        raise ValueError(
            f"gold length {len(gold)} != logits length {logits.logits.shape[0]}")
    rows = np.array([i for i, t in enumerate(gold) if t != IGNORE_TAG])
    if rows.size == 0:
        raise ValueError("no supervised positions: every tag is the ignore sentinel")
    cols = np.array([gold[i] for i in rows])
    log_probs = logits.logits.log_softmax(axis=-1)
    return -(log_probs[rows, cols].mean())


def decode_spans(pred_tags: list[int], word_ids: list[int | None]) -> SpanSet:
    """Turn a subword tag sequence into word-index spans.

    Only the first subword of each word is decision-bearing. B opens a span
    (closing any open one), I extends an open span and is dropped otherwise,
    O closes. A span still open at a no-word position or at the end of the
    sequence is flushed.
    """
    if len(pred_tags) != len(word_ids):
        raise ValueError("pred_tags and word_ids must have equal lengths")
    spans: list[tuple[int, int]] = []
    open_span = False
    begin = end = 0
    prev: int | None = None
    for tag, w in zip(pred_tags, word_ids):
        if w is None:
            if open_span:
                spans.append((begin, end))
                open_span = False
            prev = None
            continue
        if w != prev:
            if tag == TAG_B:
                if open_span:
                    spans.append((begin, end))
                begin = end = w
                open_span = True
            elif tag == TAG_I:
                if open_span:
                    end = w
            else:
                if open_span:
                    spans.append((begin, end))
                open_span = False
        prev = w
    if open_span:
        spans.append((begin, end))
    return SpanSet(spans=spans)


def spans_to_terms(spans: SpanSet, sample: Sample) -> list[str]:
    """Surface form of each span: whitespace-joined words, span order kept."""
    words = sample.words()
    terms = []
    for begin, end in spans:
        if end >= len(words):
            raise ValueError(
                f"span ({begin}, {end}) out of range for {len(words)} words")
        terms.append(" ".join(words[begin:end + 1]))
    return terms
