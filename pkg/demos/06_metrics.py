"""Exact-match scoring for the full task and its two stages.

Run:  python demos/06_metrics.py
"""

from mabsa.metrics import PredictionPair, mabsa_prf, masc_scores, mate_prf

gold = [PredictionPair("s1", "Messi", "positive"),
        PredictionPair("s1", "referee", "negative"),
        PredictionPair("s2", "Dr Lukwiya", "positive")]

# a pair counts only when sample, term and polarity all match
pred = [PredictionPair("s1", "Messi", "positive"),      # exact hit
        PredictionPair("s1", "referee", "positive"),    # wrong polarity
        PredictionPair("s2", "Lukwiya", "positive")]    # wrong span surface

full = mabsa_prf(pred, gold)
print(f"full task: P={full.precision:.3f} R={full.recall:.3f} F1={full.f1:.3f} "
      f"(tp={full.tp} fp={full.fp} fn={full.fn})")

# extraction ignores polarity, so the referee prediction now counts
spans = mate_prf(pred, gold)
print(f"extraction: P={spans.precision:.3f} R={spans.recall:.3f} "
      f"F1={spans.f1:.3f}")

# a lenient flag canonicalizes both sides before comparing terms
lenient = mabsa_prf([PredictionPair("s1", "# Messi", "positive")],
                    [PredictionPair("s1", "Messi", "positive")], lenient=True)
print(f"lenient term match: tp={lenient.tp}")

# classification over gold aspects reports accuracy and macro-F1
acc, macro = masc_scores(["positive", "neutral", "neutral"],
                         ["positive", "neutral", "negative"])
print(f"classification: acc={acc:.3f} macroF1={macro:.3f}")
