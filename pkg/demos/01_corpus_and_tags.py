"""Corpus walkthrough: legacy import, canonical JSONL, BIO word tags.

Run from the repository root:  python demos/01_corpus_and_tags.py
"""

import os
import tempfile

from mabsa.corpus import (export_canonical, import_legacy_format,
                          load_canonical, word_tags)

# The legacy interchange format stores one aspect per 4-line record: a
# sentence template with a $T$ placeholder, the aspect term, a polarity
# code (-1 negative, 0 neutral, 1 positive), and an image id. Two records
# below share one sentence+image, so they merge into a single sample.
LEGACY = """\
$T$ scoring the winning goal
Messi
1
img_2.jpg
Messi scoring the winning $T$
goal
0
img_2.jpg
we met $T$ yesterday
Dr Lukwiya
1
img_7.jpg
"""

with tempfile.TemporaryDirectory() as td:
    path = os.path.join(td, "train.txt")
    with open(path, "w") as fh:
        fh.write(LEGACY)

    split = import_legacy_format(path)
    print(f"imported {split.stats.sentences} samples, "
          f"{split.stats.aspects} aspects")
    for sample in split.samples:
        print(f"  {sample.id}: {sample.text!r}")
        for ann in sample.annotations:
            print(f"      words [{ann.begin_word}, {ann.end_word}] "
                  f"-> ({ann.term!r}, {ann.polarity})")

    # word-level BIO tags (O=0, B=1, I=2) are what the tagger learns
    for sample in split.samples:
        pairs = list(zip(sample.words(), word_tags(sample)))
        print(f"  tags for {sample.id}:", pairs)

    # canonical storage is line-delimited JSON; the round trip is exact
    jsonl = os.path.join(td, "canonical.jsonl")
    export_canonical(split, jsonl)
    print("\ncanonical form:")
    with open(jsonl) as fh:
        for line in fh:
            print("  ", line.rstrip())
    assert load_canonical(jsonl, name="train") == split
    print("round trip: exact")
