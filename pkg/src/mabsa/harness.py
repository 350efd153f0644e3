"""Operational shell: configs, checkpoints, training, prediction, ablation.

The two stages train as separate runs with separate checkpoints. Stage
one fits the extractor on BIO tags alone; stage two fits the classifier
on triples assembled from gold aspects plus fuzzily labelled extractor
predictions. Toy-backend runs are bit-deterministic given the seed:
batch order derives from (seed, epoch), parameters from the seed, and
checkpoints store exact float64 bytes.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import math
import os
import subprocess
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .autodiff import AdamW
from .corpus import DatasetSplit, Sample, word_tags
from .encoders import EncoderConfig, ToyTextEncoder, load_image, preprocess_image
from .masc import (MascModel, consistency_loss, label_from_probs,
                   sentiment_loss, total_loss)
from .mate import TagHead, aspect_label_loss, decode_spans, spans_to_terms
from .metrics import (PRF, PredictionPair, mabsa_prf, mate_prf, masc_scores,
                      prf_report, validate_report, write_report)
from .supervision import (MatcherConfig, attach_labels, noun_filter,
                          stub_pos_predicate)
from .token_align import project_word_tags

log = logging.getLogger(__name__)

DATA_ROOT_ENV = "MABSA_DATA_ROOT"


@dataclass(frozen=True)
class AblationFlags:
    no_tba: bool = False
    no_pipeline: bool = False
    shared_encoder: bool = False
    no_image: bool = False


@dataclass
class RunConfig:
    """One declarative run description; round-trips losslessly through JSON.

    Size fields default to toy-run scale; a pretrained-backend run sets
    them to the full-scale values in its config file.
    """

    learning_rate: float = 2e-5
    warmup_fraction: float = 0.1
    batch_size: int = 16
    max_text_length: int = 60
    beta: float = 0.5
    epochs: int = 150
    seed: int = 0
    backend: str = "toy"
    weight_decay: float = 0.01
    hidden_size: int = 8
    heads: int = 2
    patch_size: int = 8
    image_size: int = 16
    query_length: int = 16
    vocab_size: int = 1024
    matcher_threshold: float = 0.5
    noun_filter_mode: str = "off"  # off | stub
    union_gold_triples: bool = True
    pair_text_encoding: bool = False
    freeze_encoders: bool = False
    ablations: AblationFlags = field(default_factory=AblationFlags)

    def __post_init__(self):
        if isinstance(self.ablations, dict):
            self.ablations = AblationFlags(**self.ablations)
        for name in ("learning_rate", "batch_size", "hidden_size", "heads",
                     "patch_size", "image_size", "query_length", "vocab_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or self.beta < 0 or not 0 <= self.warmup_fraction <= 1:
            raise ValueError("epochs, beta and warmup_fraction must be nonnegative")
        if self.max_text_length < 2:
            raise ValueError("max_text_length must be >= 2")
        if not 0 <= self.matcher_threshold <= 1:
            raise ValueError("matcher_threshold must lie in [0, 1]")
        if self.noun_filter_mode not in ("off", "stub"):
            raise ValueError(f"unknown noun_filter_mode {self.noun_filter_mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(**data)

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(hidden_size=self.hidden_size, heads=self.heads,
                             patch_size=self.patch_size, image_size=self.image_size,
                             backend=self.backend, toy_seed=self.seed,
                             toy_vocab_size=self.vocab_size)

    def effective_flags(self) -> AblationFlags:
        """Resolve flag conflicts: sentence conditioning presumes separate
        encoders, so no_pipeline takes precedence over shared_encoder."""
        flags = self.ablations
        if flags.no_pipeline and flags.shared_encoder:
            log.warning("no_pipeline takes precedence; shared_encoder ignored")
            flags = replace(flags, shared_encoder=False)
        return flags


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    """Named float64 tensors plus run metadata.

    Keys: ``model.*`` current parameters, ``best.*`` the dev-selected
    snapshot, ``opt.*`` optimizer state. Serialization is canonical JSON
    with base64 little-endian float64 payloads, so load followed by save
    is byte-identical.
    """

    stage: str
    tensors: dict[str, np.ndarray]
    config_hash: str
    epoch: int
    best_metric: float
    history: list[dict] = field(default_factory=list)

    def save(self, path: str):
        packed = {}
        for name in sorted(self.tensors):
            arr = np.ascontiguousarray(self.tensors[name], dtype="<f8")
            packed[name] = {"shape": list(arr.shape),
                            "data": base64.b64encode(arr.tobytes()).decode("ascii")}
        payload = {"stage": self.stage, "config_hash": self.config_hash,
                   "epoch": self.epoch, "best_metric": self.best_metric,
                   "history": self.history, "tensors": packed}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, path: str) -> "Checkpoint":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        tensors = {}
        for name, rec in payload["tensors"].items():
            raw = base64.b64decode(rec["data"])
            tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(rec["shape"]).copy()
        return cls(stage=payload["stage"], tensors=tensors,
                   config_hash=payload["config_hash"], epoch=payload["epoch"],
                   best_metric=payload["best_metric"], history=payload["history"])

    def best_params(self) -> dict[str, np.ndarray]:
        return {k[len("best."):]: v for k, v in self.tensors.items()
                if k.startswith("best.")}

    def model_params(self) -> dict[str, np.ndarray]:
        return {k[len("model."):]: v for k, v in self.tensors.items()
                if k.startswith("model.")}

    def optimizer_arrays(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith("opt.")}


def _load_into(params: dict, arrays: dict[str, np.ndarray]):
    missing = set(params) - set(arrays)
    if missing:
        raise ValueError(f"checkpoint is missing parameters: {sorted(missing)[:4]}...")
    for name, p in params.items():
        if p.data.shape != arrays[name].shape:
            raise ValueError(f"parameter {name}: checkpoint shape "
                             f"{arrays[name].shape} != model shape {p.data.shape}")
        p.data = arrays[name].copy()


# ---------------------------------------------------------------------------
# image access
# ---------------------------------------------------------------------------

class ImageProvider:
    """Resolves image_refs to preprocessed arrays.

    Sources, in order: an in-memory dict of raw arrays, then files under
    `root` (defaulting to the MABSA_DATA_ROOT environment variable).
    """

    def __init__(self, config: EncoderConfig, root: str | None = None,
                 arrays: dict[str, np.ndarray] | None = None):
        self.config = config
        self.root = root if root is not None else os.environ.get(DATA_ROOT_ENV)
        self.arrays = arrays or {}
        self._cache: dict[str, np.ndarray] = {}

    def get(self, image_ref: str | None) -> np.ndarray | None:
        if image_ref is None:
            return None
        if image_ref not in self._cache:
            if image_ref in self.arrays:
                raw = self.arrays[image_ref]
            elif self.root is not None:
                raw = load_image(os.path.join(self.root, image_ref))
            else:
                raise ValueError(
                    f"cannot resolve image {image_ref!r}: no image root "
                    f"configured (set {DATA_ROOT_ENV} or pass arrays)")
            self._cache[image_ref] = preprocess_image(raw, self.config)
        return self._cache[image_ref]


# ---------------------------------------------------------------------------
# stage one: extraction
# ---------------------------------------------------------------------------

class MateSystem:
    """Text encoder plus tagging head, bundled for training and decoding."""

    def __init__(self, cfg: RunConfig):
        if cfg.backend != "toy":
            raise NotImplementedError(
                "training and decoding run on the toy backend; the pretrained "
                "backend is feature extraction only")
        econf = cfg.encoder_config()
        self.cfg = cfg
        self.encoder = ToyTextEncoder(econf)
        self.head = TagHead(econf.hidden_size,
                            np.random.default_rng(cfg.seed + 101))

    def params(self):
        out = {f"enc.{k}": v for k, v in self.encoder.params().items()}
        out.update({f"head.{k}": v for k, v in self.head.params().items()})
        return out

    def tag_text(self, text: str):
        feats = self.encoder.encode_text(text, self.cfg.max_text_length)
        return self.head.tag_tokens(feats)

    def predict_terms(self, sample: Sample) -> list[str]:
        logits = self.tag_text(sample.text)
        spans = decode_spans(logits.argmax_tags(), logits.alignment.word_ids)
        return spans_to_terms(spans, sample)


def _lr_at(step: int, total_steps: int, base_lr: float, warmup_fraction: float) -> float:
    warmup = max(1, int(round(warmup_fraction * max(total_steps, 1))))
    if step < warmup:
        return base_lr * (step + 1) / warmup
    return base_lr


def _batches(n: int, batch_size: int, seed: int, epoch: int):
    order = np.random.default_rng(seed * 1_000_003 + epoch).permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _mate_dev_prf(system: MateSystem, split: DatasetSplit) -> PRF:
    pred, gold = [], []
    for sample in split.samples:
        for term in system.predict_terms(sample):
            pred.append(PredictionPair(sample.id, term, "neutral"))
        for ann in sample.annotations:
            gold.append(PredictionPair(sample.id, ann.term, "neutral"))
    return mate_prf(pred, gold)


def train_mate(cfg: RunConfig, train_split: DatasetSplit,
               dev_split: DatasetSplit, resume_from: Checkpoint | None = None,
               stop_after_epoch: int | None = None) -> Checkpoint:
    """Fit the extractor on BIO tags; best checkpoint by dev span F1.

    `stop_after_epoch` checkpoints a run mid-flight without changing its
    schedule: the config still describes the full run, so resuming from
    the returned checkpoint reproduces the uninterrupted run exactly.
    """
    system = MateSystem(cfg)
    params = system.params()
    trainable = ({k: v for k, v in params.items() if k.startswith("head.")}
                 if cfg.freeze_encoders else params)
    optimizer = AdamW(trainable, lr=cfg.learning_rate,
                      weight_decay=cfg.weight_decay)

    start_epoch = 0
    history: list[dict] = []
    best_metric = -1.0
    best_snapshot: dict[str, np.ndarray] | None = None
    if resume_from is not None:
        if resume_from.config_hash != cfg.config_hash():
            raise ValueError("cannot resume: config hash mismatch")
        _load_into(params, resume_from.model_params())
        optimizer.load_state_arrays(resume_from.optimizer_arrays())
        start_epoch = resume_from.epoch
        history = list(resume_from.history)
        best_metric = resume_from.best_metric
        best_snapshot = resume_from.best_params()

    tokenizer = system.encoder.tokenizer
    aligned = []
    for sample in train_split.samples:
        align = tokenizer.tokenize_with_alignment(sample.text, cfg.max_text_length)
        aligned.append((sample, align, project_word_tags(word_tags(sample), align)))

    n = len(train_split.samples)
    steps_per_epoch = max(1, math.ceil(n / cfg.batch_size))
    total_steps = cfg.epochs * steps_per_epoch
    step = start_epoch * steps_per_epoch
    completed = start_epoch

    for epoch in range(start_epoch, cfg.epochs):
        for batch in _batches(n, cfg.batch_size, cfg.seed, epoch):
            losses = []
            for idx in batch:
                sample, align, gold_tags = aligned[idx]
                feats = system.encoder.encode(align)
                losses.append(aspect_label_loss(system.head.tag_tokens(feats),
                                                gold_tags))
            loss = losses[0]
            for extra in losses[1:]:
                loss = loss + extra
            loss = loss / len(losses)
            if not np.isfinite(loss.data):
                raise RuntimeError(
                    f"extractor training diverged at step {step}: loss={loss.data}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step(lr=_lr_at(step, total_steps, cfg.learning_rate,
                                     cfg.warmup_fraction))
            history.append({"step": step, "loss": float(loss.data)})
            step += 1
        completed = epoch + 1
        dev = _mate_dev_prf(system, dev_split).f1
        if dev > best_metric:
            best_metric = dev
            best_snapshot = {k: p.data.copy() for k, p in params.items()}
        if stop_after_epoch is not None and completed >= stop_after_epoch:
            break

    if best_snapshot is None:
        best_metric = _mate_dev_prf(system, dev_split).f1
        best_snapshot = {k: p.data.copy() for k, p in params.items()}

    tensors = {f"model.{k}": p.data.copy() for k, p in params.items()}
    tensors.update({f"best.{k}": v.copy() for k, v in best_snapshot.items()})
    tensors.update(optimizer.state_arrays())
    return Checkpoint(stage="mate", tensors=tensors, config_hash=cfg.config_hash(),
                      epoch=completed, best_metric=best_metric, history=history)


def restore_mate(cfg: RunConfig, ckpt: Checkpoint, use_best: bool = True) -> MateSystem:
    if ckpt.stage != "mate":
        raise ValueError(f"expected a mate checkpoint, got stage {ckpt.stage!r}")
    system = MateSystem(cfg)
    _load_into(system.params(), ckpt.best_params() if use_best else ckpt.model_params())
    return system


# ---------------------------------------------------------------------------
# stage two: classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MascExample:
    """A training triple carried together with its sample's image."""

    aspect: str | None
    sentence: str
    polarity: str
    image_ref: str | None
    sample_id: str = ""


def _pos_predicate(cfg: RunConfig):
    return stub_pos_predicate if cfg.noun_filter_mode == "stub" else None


def build_masc_training_set(cfg: RunConfig, mate_ckpt: Checkpoint,
                            split: DatasetSplit) -> list[MascExample]:
    """Gold-aspect triples unioned with fuzzily labelled extractor outputs."""
    system = restore_mate(cfg, mate_ckpt)
    matcher = MatcherConfig(threshold=cfg.matcher_threshold)
    predicate = _pos_predicate(cfg)
    examples: list[MascExample] = []
    seen = set()

    def add(ex: MascExample):
        if ex not in seen:
            seen.add(ex)
            examples.append(ex)

    for sample in split.samples:
        gold = [(ann.term, ann.polarity) for ann in sample.annotations]
        if cfg.union_gold_triples:
            for term, pol in gold:
                add(MascExample(term, sample.text, pol, sample.image_ref, sample.id))
        if not gold:
            continue
        predicted = noun_filter(system.predict_terms(sample), predicate)
        for t in attach_labels([predicted], [gold], [sample.text], matcher):
            add(MascExample(t.aspect, t.sentence, t.polarity,
                            sample.image_ref, sample.id))
    return examples


def masc_trainable_params(model: MascModel, flags: AblationFlags,
                          freeze_encoders: bool = False) -> dict:
    """Parameter set the optimizer sees; the TBA ablation removes exactly
    the translation module's parameters."""
    params = model.params()
    if flags.no_tba:
        params = {k: v for k, v in params.items() if not k.startswith("tba.")}
    if freeze_encoders:
        params = {k: v for k, v in params.items()
                  if not k.startswith(("text.", "vision."))}
    return params


def _masc_forward(model: MascModel, cfg: RunConfig, flags: AblationFlags,
                  sentence: str, aspect: str | None, image):
    if flags.no_pipeline or aspect is None:
        conditioning_text = sentence
    else:
        conditioning_text = aspect
    if cfg.pair_text_encoding and aspect:
        sentence = f"{sentence} {aspect}"
    if flags.no_image:
        image = None
    return model.forward(sentence, conditioning_text, image,
                         no_tba=flags.no_tba, no_image=flags.no_image)


def _masc_dev_accuracy(model: MascModel, cfg: RunConfig, flags: AblationFlags,
                       split: DatasetSplit, provider: ImageProvider) -> float:
    pred, gold = [], []
    for sample in split.samples:
        image = None if flags.no_image else provider.get(sample.image_ref)
        for ann in sample.annotations:
            fwd = _masc_forward(model, cfg, flags, sample.text, ann.term, image)
            pred.append(label_from_probs(fwd.probs.data.reshape(-1)))
            gold.append(ann.polarity)
    accuracy, _ = masc_scores(pred, gold)
    return accuracy


def build_masc_model(cfg: RunConfig, mate_ckpt: Checkpoint | None = None) -> MascModel:
    flags = cfg.effective_flags()
    model = MascModel(cfg.encoder_config(), query_length=cfg.query_length,
                      max_text_length=cfg.max_text_length)
    if flags.shared_encoder:
        if mate_ckpt is None:
            raise ValueError("shared_encoder requires the extractor checkpoint")
        enc_arrays = {k[len("enc."):]: v for k, v in mate_ckpt.best_params().items()
                      if k.startswith("enc.")}
        _load_into(model.text_encoder.params(), enc_arrays)
    return model


def train_masc(cfg: RunConfig, examples: list[MascExample],
               dev_split: DatasetSplit, mate_ckpt: Checkpoint | None = None,
               provider: ImageProvider | None = None,
               resume_from: Checkpoint | None = None,
               stop_after_epoch: int | None = None) -> Checkpoint:
    """Fit the classifier on triples; best checkpoint by dev accuracy.

    The recorded history carries the classification and consistency parts
    separately; with the TBA ablation on, the consistency term is never
    built and the step loss equals the classification loss exactly.
    """
    if not examples:
        raise ValueError("empty training set: no triples to fit")
    flags = cfg.effective_flags()
    model = build_masc_model(cfg, mate_ckpt)
    provider = provider or ImageProvider(cfg.encoder_config())
    params = masc_trainable_params(model, flags, cfg.freeze_encoders)
    optimizer = AdamW(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)

    start_epoch = 0
    history: list[dict] = []
    best_metric = -1.0
    best_snapshot: dict[str, np.ndarray] | None = None
    if resume_from is not None:
        if resume_from.config_hash != cfg.config_hash():
            raise ValueError("cannot resume: config hash mismatch")
        _load_into(model.params(), resume_from.model_params())
        optimizer.load_state_arrays(resume_from.optimizer_arrays())
        start_epoch = resume_from.epoch
        history = list(resume_from.history)
        best_metric = resume_from.best_metric
        best_snapshot = resume_from.best_params()

    n = len(examples)
    steps_per_epoch = max(1, math.ceil(n / cfg.batch_size))
    total_steps = cfg.epochs * steps_per_epoch
    step = start_epoch * steps_per_epoch
    completed = start_epoch

    for epoch in range(start_epoch, cfg.epochs):
        for batch in _batches(n, cfg.batch_size, cfg.seed + 1, epoch):
            ls_terms, lc_terms = [], []
            for idx in batch:
                ex = examples[idx]
                image = None if flags.no_image else provider.get(ex.image_ref)
                fwd = _masc_forward(model, cfg, flags, ex.sentence, ex.aspect, image)
                ls_terms.append(sentiment_loss(fwd.probs, ex.polarity))
                if not flags.no_tba:
                    lc_terms.append(consistency_loss(fwd.a_prime, fwd.aspect_tokens))
            ls = ls_terms[0]
            for extra in ls_terms[1:]:
                ls = ls + extra
            ls = ls / len(ls_terms)
            if lc_terms:
                lc = lc_terms[0]
                for extra in lc_terms[1:]:
                    lc = lc + extra
                lc = lc / len(lc_terms)
                loss = total_loss(ls, lc, cfg.beta)
                lc_value = float(lc.data)
            else:
                loss = total_loss(ls, None, cfg.beta)
                lc_value = 0.0
            if not np.isfinite(loss.data):
                raise RuntimeError(
                    f"classifier training diverged at step {step}: loss={loss.data}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step(lr=_lr_at(step, total_steps, cfg.learning_rate,
                                     cfg.warmup_fraction))
            history.append({"step": step, "loss": float(loss.data),
                            "ls": float(ls.data), "lc": lc_value})
            step += 1
        completed = epoch + 1
        dev = _masc_dev_accuracy(model, cfg, flags, dev_split, provider)
        if dev > best_metric:
            best_metric = dev
            best_snapshot = {k: p.data.copy() for k, p in model.params().items()}
        if stop_after_epoch is not None and completed >= stop_after_epoch:
            break

    if best_snapshot is None:
        best_metric = _masc_dev_accuracy(model, cfg, flags, dev_split, provider)
        best_snapshot = {k: p.data.copy() for k, p in model.params().items()}

    tensors = {f"model.{k}": p.data.copy() for k, p in model.params().items()}
    tensors.update({f"best.{k}": v.copy() for k, v in best_snapshot.items()})
    tensors.update(optimizer.state_arrays())
    return Checkpoint(stage="masc", tensors=tensors, config_hash=cfg.config_hash(),
                      epoch=completed, best_metric=best_metric, history=history)


def restore_masc(cfg: RunConfig, ckpt: Checkpoint, use_best: bool = True) -> MascModel:
    if ckpt.stage != "masc":
        raise ValueError(f"expected a masc checkpoint, got stage {ckpt.stage!r}")
    model = MascModel(cfg.encoder_config(), query_length=cfg.query_length,
                      max_text_length=cfg.max_text_length)
    _load_into(model.params(), ckpt.best_params() if use_best else ckpt.model_params())
    return model


# ---------------------------------------------------------------------------
# prediction and evaluation
# ---------------------------------------------------------------------------

def predict(cfg: RunConfig, mate_ckpt: Checkpoint, masc_ckpt: Checkpoint,
            split: DatasetSplit, provider: ImageProvider | None = None
            ) -> list[PredictionPair]:
    """Run the two-stage pipeline over a split.

    Per sample: tag, decode spans to terms, optionally noun-filter, then
    classify each surviving term. Samples with no decoded spans emit
    nothing.
    """
    flags = cfg.effective_flags()
    system = restore_mate(cfg, mate_ckpt)
    model = restore_masc(cfg, masc_ckpt)
    provider = provider or ImageProvider(cfg.encoder_config())
    predicate = _pos_predicate(cfg)

    pairs: list[PredictionPair] = []
    for sample in split.samples:
        terms = noun_filter(system.predict_terms(sample), predicate)
        if not terms:
            continue
        image = None if flags.no_image else provider.get(sample.image_ref)
        if image is None and not (flags.no_image or flags.no_tba):
            raise ValueError(f"sample {sample.id} has no image and the run is "
                             "not in a text-only mode")
        for term in terms:
            fwd = _masc_forward(model, cfg, flags, sample.text, term, image)
            label = label_from_probs(fwd.probs.data.reshape(-1))
            pairs.append(PredictionPair(sample.id, term, label))
    return pairs


def gold_pairs(split: DatasetSplit) -> list[PredictionPair]:
    return [PredictionPair(s.id, ann.term, ann.polarity)
            for s in split.samples for ann in s.annotations]


def evaluate(cfg: RunConfig, predictions: list[PredictionPair],
             gold: list[PredictionPair], task: str = "mabsa",
             split_name: str = "test", out_path: str | None = None) -> dict:
    """Score predictions and emit the metrics report.

    For the classification task, predictions join gold aspects on
    (sample, term); precision/recall are not defined there, so the report
    carries accuracy, macro-F1 and correct/total counts instead.
    """
    if task in ("mabsa", "mate"):
        scorer = mabsa_prf if task == "mabsa" else mate_prf
        prf = scorer(predictions, gold)
        report = prf_report(task, split_name, prf, cfg.config_hash(),
                            git=git_describe())
    elif task == "masc":
        gold_map = {(g.sample_id, g.term): g.polarity for g in gold}
        pred_map = {(p.sample_id, p.term): p.polarity for p in predictions}
        missing = sorted(set(gold_map) - set(pred_map))
        if missing:
            raise ValueError(f"no polarity prediction for gold aspects: "
                             f"{missing[:3]}...")
        keys = sorted(gold_map)
        pred_labels = [pred_map[k] for k in keys]
        gold_labels = [gold_map[k] for k in keys]
        acc, macro = masc_scores(pred_labels, gold_labels)
        correct = sum(p == g for p, g in zip(pred_labels, gold_labels))
        report = {"task": task, "split": split_name, "precision": None,
                  "recall": None, "f1": macro, "acc": acc,
                  "counts": {"correct": correct, "total": len(keys)},
                  "config_hash": cfg.config_hash(), "git": git_describe()}
        validate_report(report)
    else:
        raise ValueError(f"unknown task {task!r}")
    if out_path:
        write_report(report, out_path)
    return report


# ---------------------------------------------------------------------------
# ablation grid
# ---------------------------------------------------------------------------

VARIANT_FLAGS = {
    "full": AblationFlags(),
    "no_tba": AblationFlags(no_tba=True),
    "no_pipeline": AblationFlags(no_pipeline=True),
    "no_tba+no_pipeline": AblationFlags(no_tba=True, no_pipeline=True),
    "shared_encoder": AblationFlags(shared_encoder=True),
    "no_image": AblationFlags(no_image=True),
}


def _run_variant(cfg: RunConfig, mate_ckpt: Checkpoint, train_split: DatasetSplit,
                 eval_split: DatasetSplit, provider: ImageProvider) -> dict:
    examples = build_masc_training_set(cfg, mate_ckpt, train_split)
    masc_ckpt = train_masc(cfg, examples, eval_split, mate_ckpt, provider)
    predictions = predict(cfg, mate_ckpt, masc_ckpt, eval_split, provider)
    prf = mabsa_prf(predictions, gold_pairs(eval_split))
    return {"f1": prf.f1, "precision": prf.precision, "recall": prf.recall,
            "predictions": predictions}


def ablate(cfg: RunConfig, train_split: DatasetSplit, eval_split: DatasetSplit,
           out_dir: str, provider: ImageProvider | None = None,
           variants: list[str] | None = None,
           beta_values: tuple = (), batch_sizes: tuple = ()) -> dict:
    """One training run per grid point; emits a comparison table and plots.

    The extractor is shared across grid points (no flag touches stage one).
    """
    os.makedirs(out_dir, exist_ok=True)
    provider = provider or ImageProvider(cfg.encoder_config())
    variants = variants if variants is not None else list(VARIANT_FLAGS)

    mate_ckpt = train_mate(cfg, train_split, eval_split)

    rows = []
    for name in variants:
        if name not in VARIANT_FLAGS:
            raise ValueError(f"unknown variant {name!r}; "
                             f"choose from {sorted(VARIANT_FLAGS)}")
        vcfg = replace(cfg, ablations=VARIANT_FLAGS[name])
        result = _run_variant(vcfg, mate_ckpt, train_split, eval_split, provider)
        rows.append({"variant": name, "f1": result["f1"],
                     "precision": result["precision"], "recall": result["recall"]})
        log.info("variant %s: f1=%.3f", name, result["f1"])

    sweeps = {}
    for label, values, make_cfg in (
            ("beta", beta_values, lambda v: replace(cfg, beta=float(v))),
            ("batch_size", batch_sizes, lambda v: replace(cfg, batch_size=int(v)))):
        if not values:
            continue
        points = []
        for value in values:
            result = _run_variant(make_cfg(value), mate_ckpt, train_split,
                                  eval_split, provider)
            points.append({label: value, "f1": result["f1"]})
        sweeps[label] = points
        _plot_sweep(points, label, os.path.join(out_dir, f"{label}_sweep.png"))

    table = {"config_hash": cfg.config_hash(), "git": git_describe(),
             "variants": rows, "sweeps": sweeps}
    with open(os.path.join(out_dir, "ablation_table.json"), "w") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "ablation_table.md"), "w") as fh:
        fh.write("| variant | F1 | Precision | Recall |\n")
        fh.write("|---|---|---|---|\n")
        for row in rows:
            fh.write(f"| {row['variant']} | {row['f1']:.3f} "
                     f"| {row['precision']:.3f} | {row['recall']:.3f} |\n")
    return table


def _plot_sweep(points: list[dict], label: str, path: str):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [p[label] for p in points]
    ys = [p["f1"] for p in points]
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel(label)
    ax.set_ylabel("F1")
    ax.set_title(f"Effect of {label}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
