"""Building classifier training triples from noisy extractor output.

Run:  python demos/05_label_attachment.py
"""

from mabsa.supervision import (MatcherConfig, attach_labels, noun_filter,
                               similarity, stub_pos_predicate)

# normalized edit similarity on canonical forms (lowercase, punctuation
# stripped, whitespace collapsed)
pairs = [("# Messi", "Messi"), ("Mesi", "Messi"),
         ("Lucille Corti", "Dr Lucille Corti"), ("gate", "falcon")]
for a, b in pairs:
    print(f"sim({a!r}, {b!r}) = {similarity(a, b):.3f}")

# predicted aspects inherit the polarity of their best-matching gold pair
# when the similarity clears the threshold, and the first pair's polarity
# otherwise; samples with no predictions still yield one sentence-level
# triple
predictions = [["# Messi"],            # fuzzy hit
               [],                     # extractor found nothing
               ["wrong thing"]]        # no gold pair is close
gold = [[("Messi", "positive")],
        [("goal", "neutral"), ("referee", "negative")],
        [("alpha", "negative"), ("omega", "positive")]]
sentences = ["Messi scores again", "what a goal", "some sentence"]

triples = attach_labels(predictions, gold, sentences, MatcherConfig(threshold=0.5))
for t in triples:
    print(f"  aspect={t.aspect!r:<16} sentence={t.sentence!r:<22} -> {t.polarity}")

# the optional part-of-speech filter keeps only noun-headed predictions;
# the bundled predicate is a tiny lexicon, any word->tag callable works
kept = noun_filter(["Messi", "beautiful", "winning goal"], stub_pos_predicate)
print("after noun filter:", kept)
