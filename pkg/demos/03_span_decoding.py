"""Span decoder behavior on the interesting edge cases.

Run:  python demos/03_span_decoding.py
"""

from mabsa.mate import decode_spans

CASES = [
    # (description, subword tags, word ids)
    ("single leading aspect", [1, 0, 0, 0, 0], [0, 1, 2, 3, 4]),
    ("everything outside", [0, 0, 0], [0, 1, 2]),
    ("B I then a second B", [1, 2, 0, 1], [0, 1, 2, 3]),
    ("orphan I is dropped", [2, 2, 0], [0, 1, 2]),
    ("open span flushed at sequence end", [0, 1, 2], [0, 1, 2]),
    ("open span flushed at the no-word position", [0, 1, 2, 1], [None, 0, 1, None]),
    ("continuation subword tags are ignored", [1, 0, 0], [0, 0, 1]),
    ("B immediately after B closes the first", [1, 1, 2], [0, 1, 2]),
]

for description, tags, word_ids in CASES:
    spans = decode_spans(tags, word_ids).spans
    tag_names = "".join("OBI"[t] for t in tags)
    print(f"{description:<42} tags={tag_names:<6} -> {spans}")

# note the last trace: the second span keeps extending through I because
# nothing closed it; a trailing I run merges into the open span
