"""How word-level tags travel to subword positions and back.

Run:  python demos/02_subword_alignment.py
"""

from mabsa.mate import decode_spans
from mabsa.token_align import (IGNORE_TAG, ToyWordPieceTokenizer,
                               project_word_tags)

tok = ToyWordPieceTokenizer()

text = "Messi scoring the winning goal"
align = tok.tokenize_with_alignment(text, max_length=60)

print("pieces:  ", align.pieces)
print("word ids:", align.word_ids)
# every word maps to >= 1 contiguous pieces; specials carry no word id

# project word tags [B O O O O] down to pieces: only the first piece of a
# word is decision-bearing, everything else gets the ignore sentinel
word_level = [1, 0, 0, 0, 0]
projected = project_word_tags(word_level, align)
rows = [(p, w, "ignore" if t == IGNORE_TAG else ("O", "B", "I")[t])
        for p, w, t in zip(align.pieces, align.word_ids, projected)]
for piece, word, tag in rows:
    print(f"  {piece:>8}  word={word!s:>4}  tag={tag}")

# decoding inverts the projection: the span of word 0 comes back exactly
spans = decode_spans(projected, align.word_ids)
print("decoded spans:", spans.spans)

# truncation never cuts a word in half: with room for only 4 content
# pieces, the last word is dropped whole
short = tok.tokenize_with_alignment(text, max_length=8)
print("\ntruncated to 8:", short.pieces, "truncated:", short.truncated)
