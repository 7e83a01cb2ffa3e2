import math

import numpy as np
import pytest

from fontgraph import glyphgraph as gg
from fontgraph import outline as ol
from fontgraph import raster

from oracles import circle_contour_ctrls, polygon_pixel_coverage


def square_outline(a=0.0, b=1.0):
    return ol.parse_path(
        f"M {a} {a} L {b} {a} L {b} {b} L {a} {b} Z", 1.0, glyph_id=gg.glyph_id_of("X")
    )


def circle_outline():
    segs = [ol.CubicSegment(*[tuple(p) for p in c]) for c in circle_contour_ctrls()]
    return ol.GlyphOutline((ol.Contour.from_segments(segs),), glyph_id=15)


def adhoc_template(contours, glyph_id=9):
    contours = tuple(tuple(c) for c in contours)
    return gg.GraphTemplate(
        glyph_id=glyph_id, contours=contours, adjacency=gg.cycle_adjacency(contours)
    )


class TestRasterize:
    def test_full_square_all_ink(self):
        img = raster.rasterize(square_outline(), 4, 4)
        assert np.array_equal(img.pixels, np.ones((4, 4)))

    def test_ring_winding_cancellation(self):
        outer = ol.parse_path(
            "M 0.1 0.1 L 0.9 0.1 L 0.9 0.9 L 0.1 0.9 Z", 1.0
        ).contours[0]
        inner = ol.parse_path(
            "M 0.3 0.3 L 0.3 0.7 L 0.7 0.7 L 0.7 0.3 Z", 1.0
        ).contours[0]
        assert outer.orientation == ol.COUNTERCLOCKWISE
        assert inner.orientation == ol.CLOCKWISE
        img = raster.rasterize(ol.GlyphOutline((outer, inner)), 32, 32)
        assert img.pixels[16, 16] == 0.0  # hole
        assert img.pixels[16, 8] == 1.0  # ring band
        assert img.pixels[2, 2] == 0.0  # outside

    def test_half_rect_column_split(self):
        half = ol.parse_path("M 0 0 L 0.5 0 L 0.5 1 L 0 1 Z", 1.0)
        img = raster.rasterize(half, 128, 128)
        assert np.array_equal(img.pixels[:, :64], np.ones((128, 64)))
        assert np.array_equal(img.pixels[:, 64:], np.zeros((128, 64)))

    def test_fractional_boundary_column(self):
        rect = ol.parse_path("M 0 0 L 0.51 0 L 0.51 1 L 0 1 Z", 1.0)
        img = raster.rasterize(rect, 128, 128)
        # 0.51 em = 65.28 px: column 65 gets partial coverage.
        assert img.pixels[10, 64] == 1.0
        assert 0.0 < img.pixels[10, 65] < 1.0
        assert img.pixels[10, 65] == pytest.approx(0.28, abs=0.13)

    def test_against_polygon_fill_oracle(self):
        verts = np.array([[0.13, 0.2], [0.81, 0.34], [0.67, 0.88], [0.22, 0.71]])
        d = "M " + " L ".join(f"{x} {y}" for x, y in verts) + " Z"
        img = raster.rasterize(ol.parse_path(d, 1.0), 32, 32)
        oracle = polygon_pixel_coverage(verts, 32, 32)
        # 4x4 supersampling quantizes coverage to 1/16.
        assert np.abs(img.pixels - oracle).max() <= 1 / 8

    def test_y_axis_orientation(self):
        bottom = ol.parse_path("M 0 0 L 1 0 L 1 0.25 L 0 0.25 Z", 1.0)
        img = raster.rasterize(bottom, 16, 16)
        assert img.pixels[-1].sum() == 16  # bottom strip = last rows
        assert img.pixels[0].sum() == 0

    def test_translation_consistency(self):
        def rect(x0, y0):
            return ol.parse_path(
                f"M {x0} {y0} L {x0 + 0.25} {y0} L {x0 + 0.25} {y0 + 0.25} L {x0} {y0 + 0.25} Z",
                1.0,
            )

        w = h = 32
        base = raster.rasterize(rect(4 / w, 8 / h), w, h)
        moved = raster.rasterize(rect(7 / w, 10 / h), w, h)
        # Shift of (+3, +2) pixels right/up = columns +3, rows -2.
        assert np.array_equal(
            np.roll(np.roll(base.pixels, -2, axis=0), 3, axis=1), moved.pixels
        )

    def test_empty_outline_renders_blank(self):
        # Degenerate sliver far outside the image area.
        far = ol.parse_path("M 5 5 L 6 5 L 6 6 Z", 1.0)
        img = raster.rasterize(far, 8, 8)
        assert img.pixels.sum() == 0.0


class TestGraphToOutline:
    def test_square_graph_roundtrip_iou(self):
        outl = square_outline(0.1, 0.9)
        g = gg.build_graph(outl)
        recon = raster.graph_to_outline(g)
        a = raster.rasterize(outl, 128, 128)
        b = raster.rasterize(recon, 128, 128)
        assert raster.iou(a, b) >= 0.98

    def test_circle_reconstruction_deviation(self):
        outl = circle_outline()
        t = adhoc_template([(4, 10)])
        seg = gg.segment_strokes(outl, t)
        g = gg.align_nodes(outl, seg, t)
        recon = raster.graph_to_outline(g)
        worst = 0.0
        for c in recon.contours:
            for s in c.segments:
                for tt in np.linspace(0, 1, 20):
                    p = ol.bezier_eval(s, float(tt))
                    worst = max(worst, abs(math.dist(p, (0.5, 0.5)) - 0.4))
        assert worst < 0.01

    def test_two_node_loop_lens(self):
        t = adhoc_template([(2, 1)])
        nodes = np.array(
            [[0.3, 0.5, 0.0, 1.0], [0.7, 0.5, 0.0, -1.0]], dtype=np.float64
        )
        g = gg.GlyphGraph(template=t, nodes=nodes)
        recon = raster.graph_to_outline(g)
        assert len(recon.contours) == 1
        assert len(recon.contours[0].segments) == 2

    def test_duplicate_nodes_rejected(self):
        t = adhoc_template([(2, 1)])
        nodes = np.array(
            [[0.5, 0.5, 0.0, 1.0], [0.5, 0.5, 0.0, -1.0]], dtype=np.float64
        )
        g = gg.GlyphGraph(template=t, nodes=nodes)
        with pytest.raises(raster.DuplicateNodeError):
            raster.graph_to_outline(g)

    def test_inner_contour_rendered_as_hole(self):
        # Synthetic ring graph: outer loop + inner loop, both CCW as aligned.
        t = adhoc_template([(4, 5), (4, 5)])
        outer = ol.parse_path("M 0.1 0.1 L 0.9 0.1 L 0.9 0.9 L 0.1 0.9 Z", 1.0)
        inner = ol.parse_path("M 0.35 0.35 L 0.65 0.35 L 0.65 0.65 L 0.35 0.65 Z", 1.0)
        outl = ol.GlyphOutline((outer.contours[0], inner.contours[0]))
        seg = gg.segment_strokes(outl, t)
        g = gg.align_nodes(outl, seg, t)
        img = raster.rasterize(raster.graph_to_outline(g), 64, 64)
        assert img.pixels[32, 32] == 0.0
        assert img.pixels[32, 12] == 1.0


class TestMetrics:
    def test_identical(self):
        a = raster.RasterImage.from_array(np.random.default_rng(0).uniform(0, 1, (16, 16)))
        assert raster.mse(a, a) == 0.0
        assert raster.psnr(a, a) == 100.0
        assert raster.ssim(a, a) == 1.0

    def test_zero_vs_one(self):
        a = raster.RasterImage.from_array(np.zeros((8, 8)))
        b = raster.RasterImage.from_array(np.ones((8, 8)))
        assert raster.mse(a, b) == 1.0
        assert raster.psnr(a, b) == 0.0

    def test_constant_offset_closed_form(self):
        a = raster.RasterImage.from_array(np.zeros((32, 32)))
        b = raster.RasterImage.from_array(np.full((32, 32), 0.1))
        assert raster.mse(a, b) == pytest.approx(0.01)
        assert raster.psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_psnr_monotone_in_mse(self):
        a = raster.RasterImage.from_array(np.zeros((16, 16)))
        values = []
        for offset in (0.05, 0.1, 0.2, 0.4, 0.8):
            b = raster.RasterImage.from_array(np.full((16, 16), offset))
            values.append(raster.psnr(a, b))
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_dimension_mismatch(self):
        a = raster.RasterImage.from_array(np.zeros((8, 8)))
        b = raster.RasterImage.from_array(np.zeros((8, 9)))
        with pytest.raises(ValueError):
            raster.mse(a, b)

    def test_ssim_range_and_sensitivity(self):
        rng = np.random.default_rng(1)
        a = raster.RasterImage.from_array(rng.uniform(0, 1, (32, 32)))
        b = raster.RasterImage.from_array(rng.uniform(0, 1, (32, 32)))
        v = raster.ssim(a, b)
        assert -1.0 <= v < 1.0

    def test_iou(self):
        a = np.zeros((8, 8))
        a[:4] = 1.0
        b = np.zeros((8, 8))
        b[2:6] = 1.0
        got = raster.iou(
            raster.RasterImage.from_array(a), raster.RasterImage.from_array(b)
        )
        assert got == pytest.approx(2 / 6)


class TestPngIO:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        img = raster.RasterImage.from_array(
            np.round(rng.uniform(0, 1, (24, 24)) * 255) / 255
        )
        p = tmp_path / "x.png"
        raster.save_png(img, p)
        back = raster.load_png(p)
        assert np.allclose(back.pixels, img.pixels, atol=1e-9)

    def test_bytes_roundtrip(self):
        img = raster.RasterImage.from_array(np.eye(8))
        back = raster.from_png_bytes(raster.png_bytes(img))
        assert np.array_equal(back.pixels, img.pixels)
