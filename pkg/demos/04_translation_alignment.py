"""The vision-to-text translation path, piece by piece.

Run:  python demos/04_translation_alignment.py
"""

import numpy as np

from mabsa.encoders import EncoderConfig, ToyTextEncoder, ToyVisionEncoder
from mabsa.fixtures import polarity_image
from mabsa.masc import (AspectConditioner, MascModel, SentimentClassifier,
                        TranslationModule, consistency_loss, sentiment_loss,
                        total_loss)

config = EncoderConfig.toy(seed=0)        # d=8, 2 heads, 16x16 images, 8px patches
text_enc = ToyTextEncoder(config)
vision_enc = ToyVisionEncoder(config)

sentence = "the falcon looked bright by the gate"
aspect = "falcon"
image = (polarity_image("positive", np.random.default_rng(0)) - 0.5) / 0.5

t = text_enc.encode_text(sentence, 60)
a = text_enc.encode_text(aspect, 60)
v = vision_enc.encode(image)
print(f"sentence rows {t.tokens.shape}, aspect rows {a.tokens.shape}, "
      f"patch rows {v.patches.shape} (cls + {v.patch_count} patches)")

# 1. condition the patches on the aspect: patches query the aspect rows,
#    and the result is added back, so the shape never changes
rng = np.random.default_rng(1)
conditioner = AspectConditioner(8, 2, rng)
conditioned = conditioner(a, v)
print("conditioned patches:", conditioned.patches.shape)

# 2. refine with self-attention + ReLU feed-forward, then read the result
#    out through a learnable query shared across samples
translator = TranslationModule(8, 2, query_length=4, rng=rng)
refined = translator.refine_vision(conditioned)
translated = translator.translate_v2t(conditioned)
print("refined rows:", refined.shape, "-> translated rows:", translated.shape)

# 3. fuse translated row 0 with the sentence summary and classify
classifier = SentimentClassifier(8, rng)
prediction = classifier.fuse_and_classify(translated[0:1, :], t.cls)
print("probs:", np.round(prediction.probs, 4), "->", prediction.label)

# training couples a classification loss with a consistency term that
# keeps translated rows close (KL) to the aspect rows
ls = sentiment_loss(classifier.logits(translated[0:1, :] + t.cls).softmax(axis=-1),
                    "positive")
lc = consistency_loss(translated, a.tokens)
loss = total_loss(ls, lc, beta=0.5)
print(f"L_cls={float(ls.data):.4f}  L_cons={float(lc.data):.4f}  "
      f"total(beta=0.5)={float(loss.data):.4f}")

# the bundled model class wires all of the above together
model = MascModel(config, query_length=4)
print("one-call prediction:",
      model.classify_aspect(sentence, aspect, image).label)
