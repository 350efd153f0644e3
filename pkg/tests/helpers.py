"""Shared oracles and utilities for the test suite.

Everything here is deliberately independent of the library's own control
flow: the reference decoder works at word level, the reference matcher
builds an explicit similarity matrix, and gradients come from central
finite differences.
"""

from __future__ import annotations

import numpy as np

from mabsa.corpus import AspectAnnotation, DatasetSplit, Sample, compute_stats
from mabsa.supervision import TrainingTriple, similarity


def reference_decode_words(word_level_tags: list[int]) -> list[tuple[int, int]]:
    """Word-level BIO decoder: B opens (closing any open span), I extends an
    open span and is dropped otherwise, O closes; trailing spans flush."""
    spans: list[tuple[int, int]] = []
    open_span = False
    begin = end = 0
    for w, tag in enumerate(word_level_tags):
        if tag == 1:
            if open_span:
                spans.append((begin, end))
            begin = end = w
            open_span = True
        elif tag == 2:
            if open_span:
                end = w
        else:
            if open_span:
                spans.append((begin, end))
            open_span = False
    if open_span:
        spans.append((begin, end))
    return spans


def reference_attach(predictions, gold, sentences, threshold):
    """Matrix-form reference for label attachment.

    For each sample: no predictions emits one no-aspect triple labelled by
    the first gold pair; otherwise each prediction takes the polarity of
    its best-similarity gold pair when that similarity strictly clears the
    threshold, and the first pair's polarity when it does not.
    """
    out = []
    for preds, pairs, sentence in zip(predictions, gold, sentences):
        if not pairs:
            continue
        if not preds:
            out.append(TrainingTriple(None, sentence, pairs[0][1]))
            continue
        matrix = np.array([[similarity(p, term) for term, _ in pairs]
                           for p in preds])
        for row, pred in enumerate(preds):
            best = int(matrix[row].argmax())
            if matrix[row, best] > threshold:
                out.append(TrainingTriple(pred, sentence, pairs[best][1]))
            else:
                out.append(TrainingTriple(pred, sentence, pairs[0][1]))
    return out


def central_difference(loss_fn, param, eps: float = 5e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar loss wrt one tensor."""
    num = np.zeros_like(param.data)
    it = np.nditer(param.data, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = param.data[idx]
        param.data[idx] = orig + eps
        up = loss_fn()
        param.data[idx] = orig - eps
        down = loss_fn()
        param.data[idx] = orig
        num[idx] = (up - down) / (2 * eps)
    return num


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray, name: str = ""):
    """1e-4 relative agreement, with a 1e-8 absolute floor for entries whose
    gradient is itself at finite-difference noise level."""
    np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8,
                               err_msg=f"gradient mismatch for {name}")


def random_word(rng: np.random.Generator, max_len: int = 9) -> str:
    letters = "abcdefghijklmnopqrstuvwxyz"
    n = int(rng.integers(1, max_len + 1))
    return "".join(letters[int(i)] for i in rng.integers(0, 26, n))


def random_annotated_sample(rng: np.random.Generator, sample_id: str) -> Sample:
    """A sample with random words and random non-overlapping aspect spans."""
    n_words = int(rng.integers(1, 13))
    words = [random_word(rng) for _ in range(n_words)]
    polarities = ("negative", "neutral", "positive")
    annotations = []
    w = 0
    while w < n_words:
        if rng.random() < 0.3:
            span_len = int(rng.integers(1, min(3, n_words - w) + 1))
            term = " ".join(words[w:w + span_len])
            annotations.append(AspectAnnotation(
                w, w + span_len - 1, term, polarities[int(rng.integers(0, 3))]))
            w += span_len
        w += 1
    return Sample(id=sample_id, text=" ".join(words), image_ref=None,
                  annotations=annotations)


def random_split(rng: np.random.Generator, n: int, name: str = "train") -> DatasetSplit:
    samples = [random_annotated_sample(rng, f"r{i:05d}") for i in range(n)]
    return DatasetSplit(name=name, samples=samples, stats=compute_stats(samples))
