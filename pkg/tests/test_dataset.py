import json
from pathlib import Path

import numpy as np
import pytest

from fontgraph import dataset as ds
from fontgraph import glyphgraph as gg
from fontgraph import raster
from fontgraph.synth import SynthFontParams, generate_synth_font, glyph_path


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    src = tmp_path_factory.mktemp("src")
    out = tmp_path_factory.mktemp("out")
    ds.write_synth_corpus(src, n_fonts=3, seed=7)
    manifest = ds.ingest(src, out)
    return src, out, manifest


class TestSynth:
    def test_slant_zero_I_mirror_symmetric(self):
        d = glyph_path("I", SynthFontParams(slant=0.0))
        from fontgraph import outline as ol

        outl = ol.parse_path(d, 1.0)
        x0, _, x1, _ = ol.outline_bbox(outl)
        cx = 0.5 * (x0 + x1)
        pts = [p for c in outl.contours for s in c.segments for p in s.points]
        mirrored = sorted((round(2 * cx - x, 9), round(y, 9)) for x, y in pts)
        direct = sorted((round(x, 9), round(y, 9)) for x, y in pts)
        assert mirrored == direct

    def test_B_has_three_contours(self):
        from fontgraph import outline as ol

        d = glyph_path("B", SynthFontParams())
        assert len(ol.parse_path(d, 1.0).contours) == 3

    def test_contour_counts_match_templates(self):
        from fontgraph import outline as ol

        font = generate_synth_font(SynthFontParams(stroke_width=0.13, slant=0.1))
        for letter, d in font.items():
            got = len(ol.parse_path(d, 1.0).contours)
            want = len(gg.build_template(gg.glyph_id_of(letter)).contours)
            assert got == want, letter

    def test_stroke_width_increases_ink(self):
        from fontgraph import outline as ol

        thin = glyph_path("H", SynthFontParams(stroke_width=0.07))
        thick = glyph_path("H", SynthFontParams(stroke_width=0.14))
        area = []
        for d in (thin, thick):
            outl = ol.normalize_outline(ol.parse_path(d, 1.0))
            area.append(raster.rasterize(outl, 64, 64).pixels.sum())
        assert area[1] > area[0]

    def test_unsupported_glyph(self):
        from fontgraph.synth import GlyphGenerationError

        with pytest.raises(GlyphGenerationError):
            glyph_path("a", SynthFontParams())

    def test_param_validation(self):
        with pytest.raises(ValueError):
            SynthFontParams(stroke_width=0.0)
        with pytest.raises(ValueError):
            SynthFontParams(slant=0.6)


class TestIngest:
    def test_full_pack_no_exclusions(self, small_corpus):
        _, _, manifest = small_corpus
        assert len(manifest.fonts) == 3
        total = sum(len(f.glyphs) for f in manifest.fonts)
        excluded = sum(g.excluded for f in manifest.fonts for g in f.glyphs)
        assert total == 3 * 26
        assert excluded == 0

    def test_artifacts_exist_and_valid(self, small_corpus):
        _, _, manifest = small_corpus
        font = manifest.fonts[0]
        for glyph in font.glyphs[:4]:
            img = raster.load_png(glyph.image_path)
            assert (img.width, img.height) == (128, 128)
            graph = gg.graph_from_json(Path(glyph.graph_path).read_text())
            assert gg.validate_graph(graph) == []

    def test_contour_mismatch_excluded(self, tmp_path):
        src = tmp_path / "src"
        font_dir = src / "weird"
        font_dir.mkdir(parents=True)
        # 'A' should have two contours; give it a bare square.
        (font_dir / "A.svg").write_text("M 0 0 L 1 0 L 1 1 L 0 1 Z")
        (font_dir / "B.svg").write_text(glyph_path("B", SynthFontParams()))
        manifest = ds.ingest(src, tmp_path / "out")
        entries = {g.letter: g for g in manifest.fonts[0].glyphs}
        assert entries["A"].excluded and entries["A"].reason == "contour mismatch"
        assert not entries["B"].excluded

    def test_unreadable_file_excluded_not_fatal(self, tmp_path):
        src = tmp_path / "src"
        font_dir = src / "broken"
        font_dir.mkdir(parents=True)
        (font_dir / "C.svg").write_text("M 0 0 L")
        (font_dir / "D.svg").write_text(glyph_path("D", SynthFontParams()))
        manifest = ds.ingest(src, tmp_path / "out")
        entries = {g.letter: g for g in manifest.fonts[0].glyphs}
        assert entries["C"].excluded and "parse error" in entries["C"].reason
        assert not entries["D"].excluded

    def test_empty_source_errors(self, tmp_path):
        empty = tmp_path / "nothing"
        empty.mkdir()
        with pytest.raises(FileNotFoundError):
            ds.ingest(empty, tmp_path / "out")

    def test_deterministic_manifests(self, small_corpus, tmp_path):
        src, _, manifest = small_corpus
        out2 = tmp_path / "out2"
        manifest2 = ds.ingest(src, out2)
        a = [[(g.letter, g.excluded, g.reason) for g in f.glyphs] for f in manifest.fonts]
        b = [[(g.letter, g.excluded, g.reason) for g in f.glyphs] for f in manifest2.fonts]
        assert a == b

    def test_parallel_matches_serial(self, small_corpus, tmp_path):
        src, _, manifest = small_corpus
        manifest2 = ds.ingest(src, tmp_path / "outp", workers=4)
        for f1, f2 in zip(manifest.fonts, manifest2.fonts):
            for g1, g2 in zip(f1.glyphs, f2.glyphs):
                assert (g1.letter, g1.excluded) == (g2.letter, g2.excluded)
                img1 = raster.load_png(g1.image_path)
                img2 = raster.load_png(g2.image_path)
                assert np.array_equal(img1.pixels, img2.pixels)

    def test_manifest_roundtrip(self, small_corpus, tmp_path):
        _, _, manifest = small_corpus
        p = tmp_path / "m.jsonl"
        manifest.write(p)
        back = ds.DatasetManifest.read(p)
        assert back == manifest


class TestSplit:
    def make_manifest(self, n):
        return ds.DatasetManifest(
            fonts=[ds.FontEntry(font_id=i, name=f"f{i}") for i in range(n)]
        )

    def test_95_5(self):
        m = ds.split(self.make_manifest(100), seed=0)
        counts = {"trainval": 0, "test": 0}
        for f in m.fonts:
            counts[f.split] += 1
        assert counts == {"trainval": 95, "test": 5}

    def test_min_one_test_font(self):
        m = ds.split(self.make_manifest(20), seed=0)
        assert sum(f.split == ds.TEST for f in m.fonts) == 1

    def test_same_seed_same_split(self):
        a = ds.split(self.make_manifest(40), seed=3)
        b = ds.split(self.make_manifest(40), seed=3)
        assert [f.split for f in a.fonts] == [f.split for f in b.fonts]

    def test_too_few_fonts(self):
        with pytest.raises(ValueError):
            ds.split(self.make_manifest(1), seed=0)

    def test_no_font_in_both(self):
        m = ds.split(self.make_manifest(37), seed=5)
        assert all(f.split in (ds.TRAINVAL, ds.TEST) for f in m.fonts)


class TestStats:
    def test_equal_bars_for_synth(self, small_corpus):
        _, _, manifest = small_corpus
        report = ds.stats(manifest)
        assert set(report["per_glyph"].values()) == {3}
        assert report["glyphs_valid"] == 78
        text = ds.format_stats(report)
        assert "fonts: 3" in text

    def test_exclusions_sum(self, tmp_path):
        src = tmp_path / "src"
        d = src / "f"
        d.mkdir(parents=True)
        (d / "A.svg").write_text("M 0 0 L 1 0 L 1 1 Z")  # mismatch
        (d / "X.svg").write_text(glyph_path("X", SynthFontParams()))
        manifest = ds.ingest(src, tmp_path / "out")
        report = ds.stats(manifest)
        assert sum(report["exclusions"].values()) == 1
        assert report["glyphs_valid"] == 1

    def test_empty_manifest_zeroes(self):
        report = ds.stats(ds.DatasetManifest())
        assert report["fonts"] == 0
        assert report["glyphs_total"] == 0


class TestBundle:
    def test_load_bundle(self, small_corpus):
        _, _, manifest = small_corpus
        bundle = ds.load_bundle(manifest)
        assert bundle.images.shape == (78, 128, 128)
        assert bundle.nodes.shape == (78, 150, 4)
        assert bundle.n_fonts == 3
        assert bundle.rows_for_glyph(1).size == 3
