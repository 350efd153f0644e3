"""Encoder contracts: shapes, determinism, gradients, preprocessing."""

import json
import os

import numpy as np
import pytest

from mabsa.encoders import (EncoderConfig, PretrainedTextEncoder,
                            ToyTextEncoder, ToyVisionEncoder, load_image,
                            preprocess_image)

from helpers import assert_grad_close, central_difference

DATA = os.path.join(os.path.dirname(__file__), "data")


class TestConfig:
    def test_heads_must_divide_hidden(self):
        with pytest.raises(ValueError):
            EncoderConfig(hidden_size=10, heads=3)

    def test_default_patch_size_follows_checkpoint(self):
        assert EncoderConfig().patch_size == 16

    def test_patch_count_geometry(self):
        assert EncoderConfig(patch_size=16, image_size=224).patch_count == 196
        assert EncoderConfig(patch_size=14, image_size=224).patch_count == 256


class TestToyTextEncoder:
    def test_feature_width_matches_hidden_size(self):
        enc = ToyTextEncoder(EncoderConfig.toy(seed=0))
        feats = enc.encode_text("any input at all", 60)
        assert feats.tokens.shape[1] == 8
        assert np.isfinite(feats.tokens.data).all()

    def test_full_scale_width(self):
        enc = ToyTextEncoder(EncoderConfig.toy(seed=0, hidden_size=768, heads=8))
        assert enc.encode_text("any input", 60).tokens.shape[1] == 768

    def test_row_count_equals_alignment_length(self):
        enc = ToyTextEncoder(EncoderConfig.toy(seed=0))
        align = enc.tokenizer.tokenize_with_alignment("three word input", 60)
        assert enc.encode(align).tokens.shape[0] == len(align)

    def test_bitwise_deterministic(self):
        enc = ToyTextEncoder(EncoderConfig.toy(seed=4))
        a = enc.encode_text("same input twice", 60).tokens.data
        b = enc.encode_text("same input twice", 60).tokens.data
        np.testing.assert_array_equal(a, b)

    def test_matches_committed_golden(self):
        with open(os.path.join(DATA, "toy_text_encoder_golden.json")) as fh:
            golden = json.load(fh)
        enc = ToyTextEncoder(EncoderConfig.toy(seed=golden["config"]["toy_seed"]))
        feats = enc.encode_text(golden["text"], 60)
        np.testing.assert_allclose(feats.tokens.data,
                                   np.array(golden["tokens"]), rtol=1e-12)

    def test_length_above_maximum_rejected(self):
        cfg = EncoderConfig.toy(seed=0)
        cfg.max_positions = 6
        enc = ToyTextEncoder(cfg)
        with pytest.raises(ValueError, match="truncate"):
            enc.encode_text("too many words for the tiny maximum", 60)

    def test_weight_gradients_match_finite_differences(self):
        enc = ToyTextEncoder(EncoderConfig.toy(seed=1))
        align = enc.tokenizer.tokenize_with_alignment("grad probe words", 60)

        def loss():
            return float(enc.encode(align).tokens.sum().data)

        out = enc.encode(align).tokens.sum()
        for p in enc.params().values():
            p.grad = None
        out.backward()
        for name, p in enc.params().items():
            numeric = central_difference(loss, p)
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            assert_grad_close(analytic, numeric, name)


class TestToyVisionEncoder:
    def test_patch_16_geometry(self):
        enc = ToyVisionEncoder(EncoderConfig(hidden_size=8, heads=2, patch_size=16,
                                             image_size=224, backend="toy"))
        feats = enc.encode(np.zeros((224, 224, 3)))
        assert feats.patch_count == 196
        assert feats.patches.shape == (197, 8)

    def test_patch_14_geometry(self):
        enc = ToyVisionEncoder(EncoderConfig(hidden_size=8, heads=2, patch_size=14,
                                             image_size=224, backend="toy"))
        feats = enc.encode(np.zeros((224, 224, 3)))
        assert feats.patch_count == 256

    def test_all_zero_image_finite_and_reproducible(self):
        enc = ToyVisionEncoder(EncoderConfig.toy(seed=2))
        a = enc.encode(np.zeros((16, 16, 3))).patches.data
        b = enc.encode(np.zeros((16, 16, 3))).patches.data
        assert np.isfinite(a).all()
        np.testing.assert_array_equal(a, b)

    def test_non_rgb_rejected(self):
        enc = ToyVisionEncoder(EncoderConfig.toy(seed=0))
        with pytest.raises(ValueError, match="RGB"):
            enc.encode(np.zeros((16, 16)))
        with pytest.raises(ValueError, match="RGB"):
            enc.encode(np.zeros((16, 16, 4)))

    def test_wrong_resolution_rejected(self):
        enc = ToyVisionEncoder(EncoderConfig.toy(seed=0))
        with pytest.raises(ValueError, match="preprocess"):
            enc.encode(np.zeros((20, 16, 3)))

    def test_null_features_broadcast_learned_row(self):
        enc = ToyVisionEncoder(EncoderConfig.toy(seed=0))
        feats = enc.null_features()
        assert feats.patches.shape == (enc.config.patch_count + 1, 8)
        rows = feats.patches.data
        np.testing.assert_array_equal(rows, np.tile(rows[0], (rows.shape[0], 1)))

    def test_shape_contract_random_inputs(self):
        rng = np.random.default_rng(12)
        enc = ToyVisionEncoder(EncoderConfig.toy(seed=3))
        for _ in range(5):
            feats = enc.encode(rng.uniform(size=(16, 16, 3)))
            assert feats.patches.shape == (5, 8)
            assert np.isfinite(feats.patches.data).all()

    def test_weight_gradients_match_finite_differences(self):
        enc = ToyVisionEncoder(EncoderConfig.toy(seed=5))
        image = np.random.default_rng(9).uniform(size=(16, 16, 3))

        def loss():
            return float(enc.encode(image).patches.sum().data)

        out = enc.encode(image).patches.sum()
        for p in enc.params().values():
            p.grad = None
        out.backward()
        for name, p in enc.params().items():
            numeric = central_difference(loss, p)
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            assert_grad_close(analytic, numeric, name)


class TestPreprocessing:
    def test_resize_then_center_crop_to_square(self):
        cfg = EncoderConfig.toy(seed=0)  # image_size 16
        out = preprocess_image(np.ones((32, 48, 3)), cfg)
        assert out.shape == (16, 16, 3)

    def test_standardization_constants(self):
        cfg = EncoderConfig.toy(seed=0)
        out = preprocess_image(np.full((16, 16, 3), 0.5), cfg)
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_identity_resolution_passthrough_geometry(self):
        cfg = EncoderConfig.toy(seed=0)
        img = np.random.default_rng(0).uniform(size=(16, 16, 3))
        out = preprocess_image(img, cfg)
        np.testing.assert_allclose(out, (img - 0.5) / 0.5)

    def test_load_npy_image(self, tmp_path):
        arr = np.random.default_rng(1).uniform(size=(16, 16, 3))
        path = str(tmp_path / "img.npy")
        np.save(path, arr)
        np.testing.assert_array_equal(load_image(path), arr)

    def test_load_non_array_rejected(self, tmp_path):
        path = str(tmp_path / "img.npy")
        np.save(path, np.zeros((4, 4)))
        with pytest.raises(ValueError, match="H, W, 3"):
            load_image(path)


class TestPretrainedBackend:
    def test_unloadable_weights_raise_cleanly(self, tmp_path):
        try:
            import transformers  # noqa: F401
        except ImportError:
            pytest.skip("transformers not installed")
        cfg = EncoderConfig(text_model_name=str(tmp_path / "nope"))
        with pytest.raises((RuntimeError, OSError, ValueError)):
            PretrainedTextEncoder(cfg)
