"""Builds sentiment training triples from predicted aspects.

Predicted aspect strings rarely equal the gold surface exactly ("# Messi"
vs "Messi"), so each prediction is fuzzily matched against the sample's
gold (aspect, polarity) pairs: the best-scoring pair lends its polarity
when the score clears a threshold, otherwise the sample's first gold pair
does. Samples whose extractor found nothing still contribute one triple
with no aspect, labelled by the first gold pair.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .corpus import POLARITIES

log = logging.getLogger(__name__)

CANONICALIZATION_RULE = "lowercase; non-alphanumerics to spaces; collapse runs"

NOUN_TAGS = {"NOUN", "PROPN"}


@dataclass(frozen=True)
class TrainingTriple:
    aspect: str | None
    sentence: str
    polarity: str


@dataclass(frozen=True)
class MatcherConfig:
    threshold: float = 0.5
    canonicalization: str = CANONICALIZATION_RULE

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


def canonicalize(s: str) -> str:
    out = []
    for ch in s.lower():
        out.append(ch if ch.isalnum() else " ")
    return " ".join("".join(out).split())


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance, one-row DP."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    """Normalized edit similarity of canonical forms, in [0, 1].

    Equal canonical forms short-circuit to 1.0. When both canonicalize to
    nothing, two genuinely empty strings count as identical and anything
    else (e.g. two different emoji-only strings) counts as 0.
    """
    ca, cb = canonicalize(a), canonicalize(b)
    if ca == cb:
        if ca:
            return 1.0
        return 1.0 if a == b == "" else 0.0
    return 1.0 - edit_distance(ca, cb) / max(len(ca), len(cb))


def attach_labels(predictions: list[list[str]],
                  gold: list[list[tuple[str, str]]],
                  sentences: list[str],
                  cfg: MatcherConfig = MatcherConfig()) -> list[TrainingTriple]:
    """Attach polarities to predicted aspects, sample by sample.

    `predictions[i]`, `gold[i]` and `sentences[i]` describe the same
    sample. A sample without gold pairs cannot be labelled and is skipped
    with a warning.
    """
    if not (len(predictions) == len(gold) == len(sentences)):
        raise ValueError("predictions, gold and sentences must align by sample")
    triples: list[TrainingTriple] = []
    for preds, pairs, sentence in zip(predictions, gold, sentences):
        if not pairs:
            log.warning("sample %r has no gold pairs; skipped", sentence[:40])
            continue
        for _, pol in pairs:
            if pol not in POLARITIES:
                raise ValueError(f"unknown polarity {pol!r}")
        if not preds:
            triples.append(TrainingTriple(None, sentence, pairs[0][1]))
            continue
        for pred in preds:
            best_score = 0.0
            best_polarity = None
            for term, pol in pairs:
                score = similarity(pred, term)
                if score > best_score:
                    best_score = score
                    best_polarity = pol
            if best_score > cfg.threshold:
                triples.append(TrainingTriple(pred, sentence, best_polarity))
            else:
                triples.append(TrainingTriple(pred, sentence, pairs[0][1]))
    return triples


def noun_filter(aspects: list[str], pos_predicate=None) -> list[str]:
    """Keep aspects whose head (last) word the predicate tags as a noun.

    With no predicate the filter is the identity. A predicate failure on a
    word keeps that aspect and logs the failure.
    """
    if pos_predicate is None:
        return list(aspects)
    kept = []
    for aspect in aspects:
        words = aspect.split()
        if not words:
            continue
        try:
            tag = pos_predicate(words[-1])
        except Exception as exc:
            log.warning("pos predicate failed on %r (%s); keeping aspect",
                        words[-1], exc)
            kept.append(aspect)
            continue
        if str(tag).upper() in NOUN_TAGS or str(tag).upper().startswith("NN"):
            kept.append(aspect)
    return kept


# Tiny lexicon so the filter is exercisable without an external tagger.
STUB_POS_LEXICON = {
    "beautiful": "ADJ", "winning": "ADJ", "great": "ADJ", "terrible": "ADJ",
    "scoring": "VERB", "died": "VERB", "share": "VERB",
    "the": "DET", "a": "DET",
    "messi": "PROPN", "goal": "NOUN", "game": "NOUN", "speech": "NOUN",
}


def stub_pos_predicate(word: str) -> str:
    """Lexicon lookup; unknown words default to NOUN (aspects usually are)."""
    return STUB_POS_LEXICON.get(word.lower(), "NOUN")


# ---------------------------------------------------------------------------
# JSONL interchange
# ---------------------------------------------------------------------------

def write_triples(triples: list[TrainingTriple], path: str):
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(json.dumps({"aspect": t.aspect, "sentence": t.sentence,
                                 "polarity": t.polarity}, ensure_ascii=False) + "\n")


def read_triples(path: str) -> list[TrainingTriple]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            rec = json.loads(raw)
            try:
                triples.append(TrainingTriple(rec["aspect"], rec["sentence"],
                                              rec["polarity"]))
            except KeyError as exc:
                raise ValueError(f"{path} line {line_no}: missing field {exc}") from None
    return triples
