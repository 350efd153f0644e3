"""Corpus contracts: legacy import, canonical round trip, BIO word tags."""

import json

import numpy as np
import pytest

from mabsa import corpus
from mabsa.corpus import (AspectAnnotation, DatasetSplit, ParseError, Sample,
                          SchemaError, SplitStats, compute_stats,
                          import_legacy_format, load_canonical,
                          export_canonical, word_tags)
from mabsa.mate import decode_spans

from helpers import random_split


MESSI_RECORD = "$T$ scoring the winning goal\nMessi\n1\nimg_2.jpg\n"


def write_legacy(tmp_path, content, name="train.txt"):
    path = tmp_path / name
    path.write_text(content, encoding="utf-8")
    return str(path)


class TestImportLegacy:
    def test_single_record(self, tmp_path):
        (tmp_path / "img_2.jpg").write_bytes(b"fake")
        split = import_legacy_format(write_legacy(tmp_path, MESSI_RECORD),
                                     image_dir=str(tmp_path))
        assert len(split.samples) == 1
        sample = split.samples[0]
        assert sample.text == "Messi scoring the winning goal"
        assert sample.image_ref == "img_2.jpg"
        assert sample.annotations == [AspectAnnotation(0, 0, "Messi", "positive")]

    def test_empty_file(self, tmp_path):
        split = import_legacy_format(write_legacy(tmp_path, ""))
        assert split.samples == []
        assert split.stats == SplitStats(0, 0, 0, 0, 0)

    def test_merge_same_sentence_and_image(self, tmp_path):
        # two records resolving to the same sentence, aspects at words 0 and 3
        content = ("$T$ saw the harbor today\numbra\n0\nimg_9.jpg\n"
                   "umbra saw the $T$ today\nharbor\n-1\nimg_9.jpg\n")
        split = import_legacy_format(write_legacy(tmp_path, content))
        assert len(split.samples) == 1
        anns = split.samples[0].annotations
        assert [(a.begin_word, a.end_word, a.polarity) for a in anns] == [
            (0, 0, "neutral"), (3, 3, "negative")]

    def test_exact_duplicate_records_collapse(self, tmp_path):
        split = import_legacy_format(write_legacy(tmp_path, MESSI_RECORD * 2))
        assert len(split.samples) == 1
        assert len(split.samples[0].annotations) == 1

    def test_polarity_code_mapping(self, tmp_path):
        content = ("$T$ one\na\n-1\ni.jpg\n"
                   "$T$ two\nb\n0\ni.jpg\n"
                   "$T$ three\nc\n1\ni.jpg\n")
        split = import_legacy_format(write_legacy(tmp_path, content))
        pols = [s.annotations[0].polarity for s in split.samples]
        assert pols == ["negative", "neutral", "positive"]

    def test_dangling_record_names_line(self, tmp_path):
        content = MESSI_RECORD + "$T$ incomplete\nfoo\n"
        with pytest.raises(ParseError, match="line 5"):
            import_legacy_format(write_legacy(tmp_path, content))

    def test_missing_placeholder_is_record_error(self, tmp_path):
        content = "no placeholder here\nfoo\n1\ni.jpg\n"
        with pytest.raises(ParseError, match="record 1"):
            import_legacy_format(write_legacy(tmp_path, content))

    def test_bad_polarity_code(self, tmp_path):
        content = "$T$ ok\nfoo\n7\ni.jpg\n"
        with pytest.raises(ParseError, match="polarity"):
            import_legacy_format(write_legacy(tmp_path, content))

    def test_unresolvable_image_marks_absent(self, tmp_path, caplog):
        with caplog.at_level("WARNING"):
            split = import_legacy_format(write_legacy(tmp_path, MESSI_RECORD),
                                         image_dir=str(tmp_path))
        assert split.samples[0].image_ref is None
        assert "img_2.jpg" in caplog.text

    def test_multiword_aspect_span(self, tmp_path):
        content = "we met $T$ yesterday\nDr Lukwiya\n1\ni.jpg\n"
        split = import_legacy_format(write_legacy(tmp_path, content))
        ann = split.samples[0].annotations[0]
        assert (ann.begin_word, ann.end_word) == (2, 3)
        assert split.samples[0].text == "we met Dr Lukwiya yesterday"


class TestCanonicalRoundTrip:
    def test_three_sample_round_trip(self, tmp_path):
        split = random_split(np.random.default_rng(1), 3)
        path = str(tmp_path / "train.jsonl")
        export_canonical(split, path)
        assert load_canonical(path) == split

    def test_absent_image_serializes_null(self, tmp_path):
        sample = Sample("a", "hello world", None, [])
        split = DatasetSplit("train", [sample], compute_stats([sample]))
        path = str(tmp_path / "train.jsonl")
        export_canonical(split, path)
        record = json.loads(open(path).read())
        assert record["image"] is None
        assert load_canonical(path).samples[0].image_ref is None

    def test_import_export_load_idempotent(self, tmp_path):
        legacy = write_legacy(tmp_path, MESSI_RECORD)
        split = import_legacy_format(legacy)
        p1, p2 = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
        export_canonical(split, p1)
        once = load_canonical(p1, name="train")
        export_canonical(once, p2)
        assert load_canonical(p2, name="train") == once
        assert open(p1).read() == open(p2).read()

    def test_schema_error_names_field_and_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "x", "text": "hi", "image": null}\n')
        with pytest.raises(SchemaError, match="line 1.*aspects"):
            load_canonical(str(path))

    def test_bad_polarity_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        record = {"id": "x", "text": "hi there", "image": None,
                  "aspects": [{"from_word": 0, "to_word": 0, "term": "hi",
                               "polarity": "happy"}]}
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(SchemaError, match="polarity"):
            load_canonical(str(path))


class TestWordTags:
    def test_single_leading_aspect(self):
        sample = Sample("x", "Messi scoring the winning goal", None,
                        [AspectAnnotation(0, 0, "Messi", "positive")])
        assert word_tags(sample) == [1, 0, 0, 0, 0]

    def test_no_annotations_all_outside(self):
        sample = Sample("x", "just some plain words", None, [])
        assert word_tags(sample) == [0, 0, 0, 0]

    def test_two_spans(self):
        sample = Sample("x", "aa bb cc dd ee", None,
                        [AspectAnnotation(0, 1, "aa bb", "neutral"),
                         AspectAnnotation(3, 3, "dd", "positive")])
        assert word_tags(sample) == [1, 2, 0, 1, 0]
        # decoding the word-level tags recovers the spans exactly
        tags = word_tags(sample)
        decoded = decode_spans(tags, list(range(len(tags))))
        assert decoded.spans == [(0, 1), (3, 3)]

    def test_overlap_rejected(self):
        sample = Sample("x", "aa bb cc", None,
                        [AspectAnnotation(0, 1, "aa bb", "neutral"),
                         AspectAnnotation(1, 2, "bb cc", "neutral")])
        with pytest.raises(ValueError, match="overlap"):
            word_tags(sample)


class TestStatsAndValidation:
    def test_stats_match_brute_force_recount(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            split = random_split(rng, int(rng.integers(0, 8)))
            per = {"positive": 0, "neutral": 0, "negative": 0}
            total = 0
            for s in split.samples:
                for a in s.annotations:
                    per[a.polarity] += 1
                    total += 1
            assert split.stats == SplitStats(len(split.samples), total,
                                             per["positive"], per["neutral"],
                                             per["negative"])
            split.validate()

    def test_validate_rejects_stale_stats(self):
        split = random_split(np.random.default_rng(2), 3)
        split.stats = SplitStats(99, 0, 0, 0, 0)
        with pytest.raises(ValueError, match="disagree"):
            split.validate()

    def test_term_must_match_surface(self):
        sample = Sample("x", "aa bb", None,
                        [AspectAnnotation(0, 0, "zz", "neutral")])
        with pytest.raises(ValueError, match="surface"):
            sample.validate()

    def test_reference_table_counts(self):
        ref = corpus.REFERENCE_STATS
        assert ref["twitter15"]["train"] == SplitStats(2100, 3179, 928, 1883, 368)
        assert ref["twitter15"]["test"] == SplitStats(674, 1037, 317, 607, 113)
        assert ref["twitter17"]["train"] == SplitStats(1745, 3562, 1508, 1638, 416)

    def test_check_reference_stats_reports_mismatches(self):
        sample = Sample("a", "tiny corpus", None, [])
        split = DatasetSplit("train", [sample], compute_stats([sample]))
        problems = corpus.check_reference_stats(split, "twitter15")
        assert any("sentences" in p for p in problems)
        with pytest.raises(ValueError):
            corpus.check_reference_stats(split, "twitter3000")
