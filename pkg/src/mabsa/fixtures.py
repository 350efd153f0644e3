"""Deterministic synthetic corpora for desk-scale runs.

The generated posts are built so a toy-scale model can actually learn
them: every aspect name carries a fixed polarity cued by an adjective in
the sentence, and each image encodes the gold polarity in its dominant
color channel. A configurable number of "ambiguous pairs" share one
sentence but differ in image and polarity, which makes the image signal
load-bearing: no text-only model can fit those samples.
"""

from __future__ import annotations

import os

import numpy as np

from .corpus import (AspectAnnotation, DatasetSplit, POLARITIES, Sample,
                     compute_stats, export_canonical)

# Names reserved for ambiguous pairs come first and never appear in
# regular samples, so their polarity is decidable only from the image.
ASPECT_NAMES = ["umbra", "zephyr", "falcon", "harbor", "medley", "quartz",
                "sonata", "trellis", "velvet", "willow", "cobalt", "meadow"]

ADJECTIVES = {
    "negative": ["grim", "broken"],
    "neutral": ["plain", "usual"],
    "positive": ["bright", "grand"],
}

FILLERS = ["gate", "crowd", "morning", "river", "market", "harvest"]

IMAGE_SIZE = 16


def polarity_image(polarity: str, rng: np.random.Generator,
                   size: int = IMAGE_SIZE) -> np.ndarray:
    """Low-noise image whose dominant channel encodes the polarity."""
    img = rng.uniform(0.0, 0.15, (size, size, 3))
    img[:, :, POLARITIES.index(polarity)] += 0.7
    return img


def synthetic_split(n: int = 20, seed: int = 7, name: str = "train",
                    ambiguous_pairs: int = 2
                    ) -> tuple[DatasetSplit, dict[str, np.ndarray]]:
    """Build `n` samples plus their images, keyed by image_ref.

    The first 2*ambiguous_pairs samples are the image-dependent ones; the
    rest cycle through single-aspect, two-word-aspect and double-aspect
    sentence shapes.
    """
    if n < 2 * ambiguous_pairs + 1:
        raise ValueError("n too small for the requested ambiguous pairs")
    rng = np.random.default_rng(seed)
    samples: list[Sample] = []
    images: dict[str, np.ndarray] = {}

    def add(text: str, annotations: list[AspectAnnotation], polarity_for_image: str):
        idx = len(samples)
        ref = f"img_{idx:03d}.npy"
        images[ref] = polarity_image(polarity_for_image, rng)
        samples.append(Sample(id=f"syn{idx:03d}", text=text, image_ref=ref,
                              annotations=annotations))

    for k in range(ambiguous_pairs):
        pair_name = ASPECT_NAMES[k]
        text = f"the {pair_name} stood there quietly"
        for polarity in ("positive", "negative"):
            add(text, [AspectAnnotation(1, 1, pair_name, polarity)], polarity)

    regular_names = ASPECT_NAMES[ambiguous_pairs:]
    name_polarity = {nm: POLARITIES[i % 3] for i, nm in enumerate(regular_names)}
    i = len(samples)
    while len(samples) < n:
        shape = i % 4
        nm = regular_names[i % len(regular_names)]
        pol = name_polarity[nm]
        adj = ADJECTIVES[pol][i % 2]
        filler = FILLERS[i % len(FILLERS)]
        if shape == 3 and len(samples) + 1 < n:
            nm2 = regular_names[(i + 3) % len(regular_names)]
            if nm2 == nm:
                nm2 = regular_names[(i + 4) % len(regular_names)]
            pol2 = name_polarity[nm2]
            adj2 = ADJECTIVES[pol2][(i + 1) % 2]
            text = (f"the {nm} seemed {adj} while the {nm2} stayed {adj2}")
            anns = [AspectAnnotation(1, 1, nm, pol),
                    AspectAnnotation(6, 6, nm2, pol2)]
        elif shape == 2:
            text = f"the {nm} station hummed {adj} all {filler}"
            anns = [AspectAnnotation(1, 2, f"{nm} station", pol)]
        else:
            text = f"the {nm} looked {adj} by the {filler}"
            anns = [AspectAnnotation(1, 1, nm, pol)]
        add(text, anns, pol)
        i += 1

    split = DatasetSplit(name=name, samples=samples, stats=compute_stats(samples))
    split.validate()
    return split, images


def write_corpus(split: DatasetSplit, images: dict[str, np.ndarray],
                 out_dir: str) -> tuple[str, str]:
    """Materialize a split as canonical JSONL plus .npy images.

    Returns (jsonl_path, image_dir).
    """
    os.makedirs(out_dir, exist_ok=True)
    image_dir = os.path.join(out_dir, "images")
    os.makedirs(image_dir, exist_ok=True)
    for ref, arr in images.items():
        np.save(os.path.join(image_dir, ref), arr)
    jsonl_path = os.path.join(out_dir, f"{split.name}.jsonl")
    export_canonical(split, jsonl_path)
    return jsonl_path, image_dir


def overfit_fixture() -> tuple[DatasetSplit, dict[str, np.ndarray]]:
    """The bundled 20-sample fixture used by the overfit checks."""
    return synthetic_split(n=20, seed=7, name="train", ambiguous_pairs=2)
