"""Aspect-oriented sentiment classification with vision-to-text translation.

The classification path, given a sentence, one aspect term and an image:

1. encode the sentence (summary row ``t_cls``) and the aspect term;
2. condition patch features on the aspect via cross-attention with a
   residual (patches are the queries, aspect rows the keys/values);
3. refine the conditioned patches with one self-attention + ReLU
   feed-forward block and read them out through a learnable query shared
   across samples, yielding translated text-like rows ``a'``;
4. sum ``a'`` row 0 with ``t_cls`` and classify into three polarities.

Training adds a consistency term: row distributions of ``a'`` should stay
close (KL) to those of the aspect features, the target held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, parameter
from .corpus import POLARITIES
from .encoders import (EncoderConfig, PatchFeatures, TextFeatures,
                       ToyTextEncoder, ToyVisionEncoder, multi_head_attention)

POLARITY_INDEX = {p: i for i, p in enumerate(POLARITIES)}
NEUTRAL_INDEX = POLARITY_INDEX["neutral"]


@dataclass
class SentimentPrediction:
    probs: np.ndarray
    label: str


def label_from_probs(probs: np.ndarray) -> str:
    """Argmax label; exact ties resolve to neutral when neutral is tied."""
    best = probs.max()
    tied = [i for i in range(len(POLARITIES)) if probs[i] == best]
    if len(tied) > 1 and NEUTRAL_INDEX in tied:
        return POLARITIES[NEUTRAL_INDEX]
    return POLARITIES[tied[0]]


class AspectConditioner:
    """Cross-attention residual that reads aspect rows into patch rows."""

    def __init__(self, d: int, heads: int, rng: np.random.Generator):
        self.heads = heads
        scale = 1.0 / np.sqrt(d)
        self.wq = parameter(rng.normal(0.0, scale, (d, d)))
        self.wk = parameter(rng.normal(0.0, scale, (d, d)))
        self.wv = parameter(rng.normal(0.0, scale, (d, d)))
        self.wo = parameter(rng.normal(0.0, scale, (d, d)))

    def __call__(self, aspect: TextFeatures, vision: PatchFeatures) -> PatchFeatures:
        if aspect.tokens.shape[0] == 0:
            return vision
        attn, _ = multi_head_attention(vision.patches, aspect.tokens,
                                       self.wq, self.wk, self.wv, self.heads)
        return PatchFeatures(patches=vision.patches + attn @ self.wo,
                             patch_count=vision.patch_count,
                             patch_size=vision.patch_size)

    def params(self) -> dict[str, Tensor]:
        return {n: getattr(self, n) for n in ("wq", "wk", "wv", "wo")}


class TranslationModule:
    """Vision refiner plus learnable-query readout (the v2t translator).

    One projection triple serves both the self-attention refiner and the
    query readout; the query matrix is shared across samples.
    """

    def __init__(self, d: int, heads: int, query_length: int,
                 rng: np.random.Generator):
        if d % heads != 0:
            raise ValueError("hidden size must be divisible by heads")
        self.heads = heads
        self.query_length = query_length
        scale = 1.0 / np.sqrt(d)
        self.wq = parameter(rng.normal(0.0, scale, (d, d)))
        self.wk = parameter(rng.normal(0.0, scale, (d, d)))
        self.wv = parameter(rng.normal(0.0, scale, (d, d)))
        self.ff_w = parameter(rng.normal(0.0, scale, (d, d)))
        self.ff_b = parameter(np.zeros(d))
        self.q_t = parameter(rng.normal(0.0, 0.5, (query_length, d)))

    def refine_vision(self, vision: PatchFeatures) -> Tensor:
        """Self-attention over patch rows plus a ReLU feed-forward residual."""
        attended, _ = multi_head_attention(vision.patches, vision.patches,
                                           self.wq, self.wk, self.wv, self.heads)
        hidden = (attended @ self.ff_w + self.ff_b).relu()
        return attended + hidden

    def translate_v2t(self, vision: PatchFeatures) -> Tensor:
        """Refine, then read out query_length translated rows; row 0 is the
        translated summary."""
        refined = self.refine_vision(vision)
        out, _ = multi_head_attention(self.q_t, refined,
                                      self.wq, self.wk, self.wv, self.heads)
        return out

    def params(self) -> dict[str, Tensor]:
        return {n: getattr(self, n)
                for n in ("wq", "wk", "wv", "ff_w", "ff_b", "q_t")}


class SentimentClassifier:
    """Linear three-way classifier over the fused summary vector."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.wg = parameter(rng.normal(0.0, 1.0 / np.sqrt(d), (d, len(POLARITIES))))
        self.bg = parameter(np.zeros(len(POLARITIES)))

    def logits(self, fused: Tensor) -> Tensor:
        return fused @ self.wg + self.bg

    def fuse_and_classify(self, a_prime_cls: Tensor, t_cls: Tensor) -> SentimentPrediction:
        fused = a_prime_cls + t_cls
        probs = self.logits(fused).softmax(axis=-1).data.reshape(-1)
        return SentimentPrediction(probs=probs, label=label_from_probs(probs))

    def params(self) -> dict[str, Tensor]:
        return {"wg": self.wg, "bg": self.bg}


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def sentiment_loss(probs: Tensor, gold: str) -> Tensor:
    """Negative log probability of the gold polarity.

    A probability under 1e-12 is clamped by that epsilon before the log so
    the loss stays finite.
    """
    if gold not in POLARITY_INDEX:
        raise ValueError(f"unknown polarity {gold!r}")
    p = probs.reshape(-1)[POLARITY_INDEX[gold]:POLARITY_INDEX[gold] + 1]
    if p.data[0] < 1e-12:
        p = p + 1e-12
    return -(p.log().sum())


def consistency_loss(a_prime: Tensor, a_target: Tensor) -> Tensor:
    """Mean row-wise KL between translated and target feature distributions.

    Rows become distributions via softmax over the feature dimension; the
    target never receives gradient. When the two sides disagree on row
    count, both are mean-pooled to a single row first.
    """
    target = a_target.detach()
    if a_prime.shape[0] != target.shape[0]:
        a_prime = a_prime.mean(axis=0, keepdims=True)
        target = target.mean(axis=0, keepdims=True)
    if a_prime.shape != target.shape:
        raise ValueError(
            f"incomparable shapes after pooling: {a_prime.shape} vs {target.shape}")
    lp = a_prime.log_softmax(axis=-1)
    lq = target.log_softmax(axis=-1)
    p = lp.exp()
    return (p * (lp - lq)).sum(axis=-1).mean()


def total_loss(ls: Tensor, lc: Tensor | None, beta: float) -> Tensor:
    """Classification loss plus beta-weighted consistency loss."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if lc is None:
        return ls
    return ls + lc * beta


# ---------------------------------------------------------------------------
# full classification model
# ---------------------------------------------------------------------------

@dataclass
class MascForward:
    """Everything a training step needs from one forward pass."""

    probs: Tensor
    a_prime: Tensor | None
    aspect_tokens: Tensor
    t_cls: Tensor


class MascModel:
    """Sentiment classifier over (sentence, aspect, image) triples.

    Owns its own encoders (task-specific by default; the harness may hand
    it the extraction model's text encoder to study encoder sharing).
    """

    def __init__(self, config: EncoderConfig, query_length: int = 16,
                 max_text_length: int = 60, text_encoder: ToyTextEncoder | None = None):
        if config.backend != "toy":
            raise ValueError("MascModel trains with the toy backend; the "
                             "pretrained backend serves feature extraction only")
        d = config.hidden_size
        rng = np.random.default_rng(config.toy_seed + 2)
        self.config = config
        self.max_text_length = max_text_length
        self.text_encoder = text_encoder or ToyTextEncoder(config)
        self.vision_encoder = ToyVisionEncoder(config)
        self.conditioner = AspectConditioner(d, config.heads, rng)
        self.translation = TranslationModule(d, config.heads, query_length, rng)
        self.classifier = SentimentClassifier(d, rng)

    def forward(self, sentence: str, aspect_term: str,
                image: np.ndarray | None, *, no_tba: bool = False,
                no_image: bool = False) -> MascForward:
        text = self.text_encoder.encode_text(sentence, self.max_text_length)
        aspect = self.text_encoder.encode_text(aspect_term, self.max_text_length)

        if no_tba:
            probs = self.classifier.logits(text.cls).softmax(axis=-1)
            return MascForward(probs=probs, a_prime=None,
                               aspect_tokens=aspect.tokens, t_cls=text.cls)

        if no_image or image is None:
            if image is not None:
                raise ValueError("an image was supplied in text-only mode")
            if not no_image:
                raise ValueError("sample has no image and text-only mode is off")
            vision = self.vision_encoder.null_features()
        else:
            vision = self.vision_encoder.encode(image)

        conditioned = self.conditioner(aspect, vision)
        a_prime = self.translation.translate_v2t(conditioned)
        fused = a_prime[0:1, :] + text.cls
        probs = self.classifier.logits(fused).softmax(axis=-1)
        return MascForward(probs=probs, a_prime=a_prime,
                           aspect_tokens=aspect.tokens, t_cls=text.cls)

    def classify_aspect(self, sentence: str, aspect_term: str,
                        image: np.ndarray | None, *, no_tba: bool = False,
                        no_image: bool = False) -> SentimentPrediction:
        if not aspect_term:
            raise ValueError("aspect_term must be non-empty")
        fwd = self.forward(sentence, aspect_term, image,
                           no_tba=no_tba, no_image=no_image)
        probs = fwd.probs.data.reshape(-1)
        return SentimentPrediction(probs=probs, label=label_from_probs(probs))

    def params(self) -> dict[str, Tensor]:
        out = {}
        for prefix, owner in (("text", self.text_encoder),
                              ("vision", self.vision_encoder),
                              ("cond", self.conditioner),
                              ("tba", self.translation),
                              ("cls", self.classifier)):
            for name, p in owner.params().items():
                out[f"{prefix}.{name}"] = p
        return out
