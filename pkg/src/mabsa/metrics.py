"""Exact-match evaluation for the full task and its two stages.

A predicted pair counts only when sample id, aspect term and polarity all
match a gold pair (term matching is raw string equality by default; a
lenient flag canonicalizes both sides first). Precision/recall/F1 are
micro-averaged over the corpus. Stage scores: term-only matching for
extraction, accuracy plus macro-F1 for classification over gold aspects.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .corpus import POLARITIES
from .supervision import canonicalize


@dataclass(frozen=True)
class PredictionPair:
    sample_id: str
    term: str
    polarity: str

    def __post_init__(self):
        if not self.term:
            raise ValueError("term must be non-empty")
        if self.polarity not in POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _prf(tp: int, fp: int, fn: int) -> PRF:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1, tp, fp, fn)


def _match_sets(pred, gold, key):
    pred_keys = {key(p) for p in pred}
    gold_keys = {key(g) for g in gold}
    tp = len(pred_keys & gold_keys)
    return _prf(tp, len(pred_keys) - tp, len(gold_keys) - tp)


def mabsa_prf(pred: list[PredictionPair], gold: list[PredictionPair],
              lenient: bool = False) -> PRF:
    """Micro P/R/F1 over (sample, term, polarity) exact matches.

    Duplicate pairs within a sample dedupe on both sides. The empty/empty
    corpus scores zero by convention.
    """
    norm = canonicalize if lenient else (lambda t: t)
    return _match_sets(pred, gold,
                       key=lambda p: (p.sample_id, norm(p.term), p.polarity))


def mate_prf(pred: list[PredictionPair], gold: list[PredictionPair],
             lenient: bool = False) -> PRF:
    """Micro P/R/F1 over (sample, term) matches, polarity ignored."""
    norm = canonicalize if lenient else (lambda t: t)
    return _match_sets(pred, gold, key=lambda p: (p.sample_id, norm(p.term)))


def masc_scores(pred: list[str], gold: list[str]) -> tuple[float, float]:
    """Accuracy and macro-F1 of polarity predictions over gold aspects.

    Lists align position by position. Macro-F1 averages per-class F1 over
    the classes that occur in either list.
    """
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs "
                         f"{len(gold)} gold labels")
    if not gold:
        return 0.0, 0.0
    correct = sum(p == g for p, g in zip(pred, gold))
    accuracy = correct / len(gold)
    f1s = []
    for cls in POLARITIES:
        tp = sum(p == cls and g == cls for p, g in zip(pred, gold))
        fp = sum(p == cls and g != cls for p, g in zip(pred, gold))
        fn = sum(p != cls and g == cls for p, g in zip(pred, gold))
        if tp + fp + fn == 0:
            continue
        f1s.append(_prf(tp, fp, fn).f1)
    macro_f1 = sum(f1s) / len(f1s) if f1s else 0.0
    return accuracy, macro_f1


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

REPORT_FIELDS = {
    "task": str,
    "split": str,
    "precision": (float, type(None)),
    "recall": (float, type(None)),
    "f1": (float, type(None)),
    "acc": (float, type(None)),
    "counts": dict,
    "config_hash": str,
    "git": str,
}


def validate_report(report: dict) -> None:
    for name, types in REPORT_FIELDS.items():
        if name not in report:
            raise ValueError(f"report missing field {name!r}")
        if not isinstance(report[name], types):
            raise ValueError(f"report field {name!r} has type "
                             f"{type(report[name]).__name__}")
    for key, value in report["counts"].items():
        if not isinstance(value, int):
            raise ValueError(f"count {key!r} is not an integer")


def prf_report(task: str, split: str, prf: PRF, config_hash: str,
               git: str = "unknown", acc: float | None = None) -> dict:
    report = {
        "task": task,
        "split": split,
        "precision": prf.precision,
        "recall": prf.recall,
        "f1": prf.f1,
        "acc": acc,
        "counts": {"tp": prf.tp, "fp": prf.fp, "fn": prf.fn},
        "config_hash": config_hash,
        "git": git,
    }
    validate_report(report)
    return report


def write_report(report: dict, path: str):
    validate_report(report)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_pairs_jsonl(path: str) -> list[PredictionPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            rec = json.loads(raw)
            try:
                pairs.append(PredictionPair(rec["sample_id"], rec["term"],
                                            rec["polarity"]))
            except KeyError as exc:
                raise ValueError(f"{path} line {line_no}: missing field {exc}") from None
    return pairs


def write_pairs_jsonl(pairs: list[PredictionPair], path: str):
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps(asdict(p), ensure_ascii=False) + "\n")
