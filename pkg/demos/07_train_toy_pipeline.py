"""Train the full two-stage pipeline on the bundled synthetic corpus.

Everything runs on the CPU-only toy backend in a few seconds. The corpus
is built so that images genuinely matter: two pairs of samples share the
same sentence and differ only in image and polarity.

Run:  python demos/07_train_toy_pipeline.py
"""

import time

from mabsa.fixtures import overfit_fixture
from mabsa.harness import (ImageProvider, RunConfig, build_masc_training_set,
                           evaluate, gold_pairs, predict, train_masc,
                           train_mate)

split, images = overfit_fixture()
print(f"fixture: {split.stats.sentences} samples, {split.stats.aspects} aspects "
      f"({split.stats.positive} pos / {split.stats.neutral} neu / "
      f"{split.stats.negative} neg)")

cfg = RunConfig(learning_rate=0.01, epochs=60, batch_size=4, seed=3,
                weight_decay=0.0)
provider = ImageProvider(cfg.encoder_config(), arrays=images)

started = time.perf_counter()
mate_ckpt = train_mate(cfg, split, split)
print(f"stage one done: {len(mate_ckpt.history)} steps, "
      f"dev span F1 {mate_ckpt.best_metric:.3f}")

# stage two trains on gold triples unioned with fuzzily labelled
# extractor predictions
examples = build_masc_training_set(cfg, mate_ckpt, split)
print(f"classifier training set: {len(examples)} triples")

masc_cfg = RunConfig(learning_rate=0.01, epochs=50, batch_size=4, seed=3,
                     weight_decay=0.0)
masc_ckpt = train_masc(masc_cfg, examples, split, mate_ckpt, provider)
print(f"stage two done: {len(masc_ckpt.history)} steps, "
      f"dev accuracy {masc_ckpt.best_metric:.3f}")

pairs = predict(masc_cfg, mate_ckpt, masc_ckpt, split, provider)
report = evaluate(masc_cfg, pairs, gold_pairs(split), task="mabsa",
                  split_name="train")
print(f"end to end: P={report['precision']:.3f} R={report['recall']:.3f} "
      f"F1={report['f1']:.3f}  ({time.perf_counter() - started:.1f}s total)")

for p in pairs[:6]:
    print(f"  {p.sample_id}: ({p.term!r}, {p.polarity})")
