"""Data model and ingestion for annotated multimodal sentiment corpora.

A corpus is a set of posts, each pairing a short text with an optional
image and zero or more aspect annotations. Word boundaries are whitespace
splits of the stored text and every span index is a word index, inclusive
on both ends.

Two on-disk forms are supported:

* the legacy 4-line text format (import only): each record is a sentence
  template containing a single ``$T$`` placeholder, the aspect term, a
  polarity code in {-1, 0, 1}, and an image id. Records sharing the same
  resolved sentence and image merge into one sample.
* the canonical JSONL format (read/write): one JSON object per line with
  fields ``id``, ``text``, ``image`` (string or null) and
  ``aspects`` = list of ``{from_word, to_word, term, polarity}``.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

POLARITIES = ("negative", "neutral", "positive")
LEGACY_POLARITY_CODES = {-1: "negative", 0: "neutral", 1: "positive"}

# Tag integer coding shared with the span decoder: O closes, B opens, I extends.
TAG_O, TAG_B, TAG_I = 0, 1, 2

PLACEHOLDER = "$T$"


class ParseError(ValueError):
    """Raised when a legacy file violates the 4-line record convention."""


class SchemaError(ValueError):
    """Raised when a canonical JSONL line violates the documented schema."""


@dataclass(frozen=True, order=True)
class AspectAnnotation:
    """One gold aspect: an inclusive word span, its surface term, a polarity."""

    begin_word: int
    end_word: int
    term: str
    polarity: str

    def __post_init__(self):
        if not 0 <= self.begin_word <= self.end_word:
            raise ValueError(
                f"invalid span ({self.begin_word}, {self.end_word}): "
                "need 0 <= begin <= end")
        if self.polarity not in POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")


@dataclass
class Sample:
    """One text+image post with its aspect annotations."""

    id: str
    text: str
    image_ref: str | None
    annotations: list[AspectAnnotation] = field(default_factory=list)

    def words(self) -> list[str]:
        return self.text.split()

    def validate(self):
        """Check span bounds, term/text agreement and span disjointness."""
        words = self.words()
        occupied = [False] * len(words)
        for ann in self.annotations:
            if ann.end_word >= len(words):
                raise ValueError(
                    f"sample {self.id}: span ({ann.begin_word}, {ann.end_word}) "
                    f"exceeds word count {len(words)}")
            surface = " ".join(words[ann.begin_word:ann.end_word + 1])
            if surface != ann.term:
                raise ValueError(
                    f"sample {self.id}: term {ann.term!r} does not equal "
                    f"span surface {surface!r}")
            for w in range(ann.begin_word, ann.end_word + 1):
                if occupied[w]:
                    raise ValueError(
                        f"sample {self.id}: overlapping annotations at word {w}")
                occupied[w] = True


@dataclass(frozen=True)
class SplitStats:
    sentences: int
    aspects: int
    positive: int
    neutral: int
    negative: int


@dataclass
class DatasetSplit:
    """A named collection of samples plus redundant summary counts."""

    name: str
    samples: list[Sample]
    stats: SplitStats

    def validate(self):
        if self.name not in ("train", "dev", "test"):
            raise ValueError(f"unknown split name {self.name!r}")
        for s in self.samples:
            s.validate()
        recounted = compute_stats(self.samples)
        if recounted != self.stats:
            raise ValueError(
                f"split {self.name}: stored stats {self.stats} disagree with "
                f"recount {recounted}")


def compute_stats(samples: list[Sample]) -> SplitStats:
    per = {p: 0 for p in POLARITIES}
    total = 0
    for s in samples:
        for ann in s.annotations:
            per[ann.polarity] += 1
            total += 1
    return SplitStats(sentences=len(samples), aspects=total,
                      positive=per["positive"], neutral=per["neutral"],
                      negative=per["negative"])


# ---------------------------------------------------------------------------
# legacy 4-line format
# ---------------------------------------------------------------------------

def _split_name_from_path(path: str) -> str:
    stem = os.path.splitext(os.path.basename(path))[0].lower()
    return stem if stem in ("train", "dev", "test") else "train"


def import_legacy_format(path: str, image_dir: str | None = None,
                         name: str | None = None) -> DatasetSplit:
    """Read a legacy 4-line file and return a validated split.

    Each record occupies four consecutive lines: sentence template with one
    ``$T$`` token, aspect term, polarity code (-1/0/1), image id. Records
    with the same resolved sentence and image merge into a single sample;
    exact-duplicate annotations collapse. Image ids resolve against
    `image_dir` when given; an id that does not resolve produces a warning
    and an absent image_ref.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    while lines and lines[-1].strip() == "":
        lines.pop()
    if len(lines) % 4 != 0:
        dangling = 4 * (len(lines) // 4) + 1
        raise ParseError(
            f"{path}: record starting at line {dangling} is incomplete "
            f"({len(lines)} lines total, expected a multiple of 4)")

    merged: dict[tuple[str, str], dict] = {}
    for rec_index in range(len(lines) // 4):
        base = 4 * rec_index
        template, term, code_str, image_id = (lines[base + i] for i in range(4))
        template, term, image_id = template.strip(), term.strip(), image_id.strip()

        tokens = template.split()
        holes = [i for i, tok in enumerate(tokens) if tok == PLACEHOLDER]
        if len(holes) != 1:
            raise ParseError(
                f"{path}: record {rec_index + 1} (line {base + 1}) must contain "
                f"the placeholder {PLACEHOLDER} exactly once as its own token, "
                f"found {len(holes)}")
        try:
            code = int(code_str.strip())
            polarity = LEGACY_POLARITY_CODES[code]
        except (ValueError, KeyError):
            raise ParseError(
                f"{path}: record {rec_index + 1} (line {base + 3}): polarity "
                f"code {code_str.strip()!r} not in {{-1, 0, 1}}") from None

        begin = holes[0]
        end = begin + len(term.split()) - 1
        text = " ".join(tokens[:begin] + term.split() + tokens[begin + 1:])

        key = (text, image_id)
        entry = merged.setdefault(key, {"text": text, "image": image_id,
                                        "annotations": set()})
        entry["annotations"].add(AspectAnnotation(begin, end, term, polarity))

    samples = []
    for i, entry in enumerate(merged.values()):
        image_ref: str | None = entry["image"]
        if image_dir is not None and image_ref is not None:
            if not os.path.exists(os.path.join(image_dir, image_ref)):
                log.warning("image %s not found under %s; marking absent",
                            image_ref, image_dir)
                image_ref = None
        sample = Sample(id=f"s{i:05d}", text=entry["text"], image_ref=image_ref,
                        annotations=sorted(entry["annotations"]))
        samples.append(sample)

    split = DatasetSplit(name=name or _split_name_from_path(path),
                         samples=samples, stats=compute_stats(samples))
    split.validate()
    return split


# ---------------------------------------------------------------------------
# canonical JSONL format
# ---------------------------------------------------------------------------

def export_canonical(split: DatasetSplit, path: str):
    """Write one JSON object per sample; absent images serialize as null."""
    split.validate()
    with open(path, "w", encoding="utf-8") as fh:
        for s in split.samples:
            record = {
                "id": s.id,
                "text": s.text,
                "image": s.image_ref,
                "aspects": [
                    {"from_word": a.begin_word, "to_word": a.end_word,
                     "term": a.term, "polarity": a.polarity}
                    for a in s.annotations
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _require(record: dict, fld: str, types, line: int):
    if fld not in record:
        raise SchemaError(f"line {line}: missing field {fld!r}")
    if not isinstance(record[fld], types):
        raise SchemaError(
            f"line {line}: field {fld!r} has type {type(record[fld]).__name__}")
    return record[fld]


def load_canonical(path: str, name: str | None = None) -> DatasetSplit:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: invalid JSON ({exc})") from None
            sid = _require(record, "id", str, line_no)
            text = _require(record, "text", str, line_no)
            image = _require(record, "image", (str, type(None)), line_no)
            aspects = _require(record, "aspects", list, line_no)
            annotations = []
            for a in aspects:
                if not isinstance(a, dict):
                    raise SchemaError(f"line {line_no}: field 'aspects' entries "
                                      "must be objects")
                begin = _require(a, "from_word", int, line_no)
                end = _require(a, "to_word", int, line_no)
                term = _require(a, "term", str, line_no)
                polarity = _require(a, "polarity", str, line_no)
                if polarity not in POLARITIES:
                    raise SchemaError(
                        f"line {line_no}: field 'polarity' value {polarity!r} "
                        f"not one of {POLARITIES}")
                annotations.append(AspectAnnotation(begin, end, term, polarity))
            samples.append(Sample(id=sid, text=text, image_ref=image,
                                  annotations=sorted(annotations)))

    split = DatasetSplit(name=name or _split_name_from_path(path),
                         samples=samples, stats=compute_stats(samples))
    split.validate()
    return split


# ---------------------------------------------------------------------------
# BIO word tags
# ---------------------------------------------------------------------------

def word_tags(sample: Sample) -> list[int]:
    """Word-level BIO tags for a sample: B at span starts, I inside, O elsewhere."""
    n = len(sample.words())
    tags = [TAG_O] * n
    for ann in sample.annotations:
        if ann.end_word >= n:
            raise ValueError(f"sample {sample.id}: span exceeds word count")
        for w in range(ann.begin_word, ann.end_word + 1):
            if tags[w] != TAG_O:
                raise ValueError(
                    f"sample {sample.id}: overlapping annotations at word {w}")
            tags[w] = TAG_I
        tags[ann.begin_word] = TAG_B
    return tags


# ---------------------------------------------------------------------------
# reference statistics for the two public twitter corpora
# ---------------------------------------------------------------------------

REFERENCE_STATS = {
    "twitter15": {
        "train": SplitStats(2100, 3179, 928, 1883, 368),
        "dev": SplitStats(737, 1122, 303, 670, 149),
        "test": SplitStats(674, 1037, 317, 607, 113),
    },
    "twitter17": {
        "train": SplitStats(1745, 3562, 1508, 1638, 416),
        "dev": SplitStats(577, 1176, 515, 517, 144),
        "test": SplitStats(587, 1234, 493, 573, 168),
    },
}


def check_reference_stats(split: DatasetSplit, dataset: str) -> list[str]:
    """Compare a split's stats to the published counts for `dataset`.

    Returns a list of mismatch descriptions (empty when everything agrees).
    """
    if dataset not in REFERENCE_STATS:
        raise ValueError(f"unknown dataset {dataset!r}; "
                         f"expected one of {sorted(REFERENCE_STATS)}")
    expected = REFERENCE_STATS[dataset][split.name]
    actual = compute_stats(split.samples)
    problems = []
    for fld in ("sentences", "aspects", "positive", "neutral", "negative"):
        got, want = getattr(actual, fld), getattr(expected, fld)
        if got != want:
            problems.append(f"{split.name}.{fld}: got {got}, reference {want}")
    return problems
