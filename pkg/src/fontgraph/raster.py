"""Conventional rendering: graph -> outline -> anti-aliased raster, plus metrics.

The rasterizer is a nonzero-winding scanline fill with 4x4 supersampled
coverage.  The em box [0,1]^2 (y up) maps onto the full image with row 0 at
the top.  Intensity 1.0 means ink.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import outline as ol
from .glyphgraph import GlyphGraph, validate_graph

DEFAULT_SIZE = 128
_SS = 4  # supersampling factor per axis


@dataclass(frozen=True)
class RasterImage:
    """Single-channel image, row-major float intensities in [0,1]."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width) float64/float32

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel buffer {self.pixels.shape} != ({self.height}, {self.width})"
            )
        if self.pixels.size and (
            self.pixels.min() < -1e-9 or self.pixels.max() > 1 + 1e-9
        ):
            raise ValueError("pixel intensities must lie in [0,1]")

    @staticmethod
    def from_array(arr: np.ndarray) -> "RasterImage":
        arr = np.asarray(arr, dtype=np.float64)
        return RasterImage(width=arr.shape[1], height=arr.shape[0], pixels=arr)


class DuplicateNodeError(ValueError):
    """Two consecutive graph nodes coincide; no curve can be fitted."""


# ---------------------------------------------------------------------------
# Graph -> outline


def graph_to_outline(g: GlyphGraph) -> ol.GlyphOutline:
    """Vectorize a graph by Hermite-style cubics between consecutive nodes.

    Between nodes i -> j the cubic is (p_i, p_i + t_i*d/3, p_j - t_j*d/3, p_j)
    with d the chord length, giving a C1 curve through all nodes.  Loops
    follow each contour's adjacency cycle and the within-stroke node order.
    Inner contours are emitted clockwise so that nonzero-winding rasterization
    carves them out as holes.

    The total-node-budget invariant is a dataset concern and is not enforced
    here, so reduced ad-hoc templates can be vectorized too.
    """
    problems = [p for p in validate_graph(g) if "node budget" not in p]
    if problems:
        raise ValueError("invalid graph: " + "; ".join(problems))
    t = g.template
    spans = t.stroke_node_spans()
    contours: list[ol.Contour] = []
    stroke_at = 0
    for ci, ((a_stroke, b_stroke), (n1, n2)) in enumerate(
        zip(t.contour_stroke_ranges(), t.contours)
    ):
        adj = np.asarray(t.adjacency)
        # Follow the directed cycle over this contour's strokes.
        order = [a_stroke]
        for _ in range(n1 - 1):
            order.append(int(adj[order[-1]].argmax()))
        node_idx: list[int] = []
        for s in order:
            lo, hi = spans[s]
            node_idx.extend(range(lo, hi))
        pts = g.nodes[node_idx, :2]
        tans = g.nodes[node_idx, 2:4]
        segs = []
        count = len(node_idx)
        for k in range(count):
            p_i = pts[k]
            p_j = pts[(k + 1) % count]
            d = float(np.linalg.norm(p_j - p_i))
            if d < 1e-9:
                raise DuplicateNodeError(
                    f"consecutive nodes {node_idx[k]} and {node_idx[(k + 1) % count]} coincide"
                )
            t_i = tans[k]
            t_j = tans[(k + 1) % count]
            c1 = p_i + t_i * d / 3.0
            c2 = p_j - t_j * d / 3.0
            segs.append(
                ol.CubicSegment(tuple(p_i), tuple(c1), tuple(c2), tuple(p_j))
            )
        contour = ol.Contour.from_segments(segs)
        if ci > 0:  # holes must wind opposite to the outer loop
            contour = contour.reversed()
        contours.append(contour)
        stroke_at += n1
    return ol.GlyphOutline(
        tuple(contours), glyph_id=t.glyph_id, source_units_per_em=1.0
    )


# ---------------------------------------------------------------------------
# Rasterization


def _outline_edges(outline: ol.GlyphOutline, tol: float) -> np.ndarray:
    """Flatten every contour into one (E, 4) array of x0,y0,x1,y1 edges."""
    edges = []
    for c in outline.contours:
        pts: list[tuple[float, float]] = []
        for seg in c.segments:
            flat = ol._flatten_segment(seg, tol)
            if pts:
                flat = flat[1:]
            pts.extend(p for _, p in flat)
        arr = np.asarray(pts)
        if len(arr) < 2:
            continue
        if np.linalg.norm(arr[0] - arr[-1]) > 1e-12:
            arr = np.vstack([arr, arr[:1]])
        e = np.concatenate([arr[:-1], arr[1:]], axis=1)
        edges.append(e)
    if not edges:
        return np.zeros((0, 4))
    return np.concatenate(edges, axis=0)


def rasterize(
    outline: ol.GlyphOutline, width: int = DEFAULT_SIZE, height: int = DEFAULT_SIZE
) -> RasterImage:
    """Nonzero-winding scanline fill with 4x4 supersampled coverage."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    sub_w, sub_h = width * _SS, height * _SS
    # Flatten finely enough that the polyline error is below a subpixel.
    tol = 0.25 / max(sub_w, sub_h)
    edges = _outline_edges(outline, tol)
    coverage = np.zeros((sub_h, sub_w), dtype=np.float64)
    if len(edges):
        x0, y0, x1, y1 = edges.T
        # Subsample centers in em coordinates (row 0 = top of the em box).
        ys = 1.0 - (np.arange(sub_h) + 0.5) / sub_h
        xs = (np.arange(sub_w) + 0.5) / sub_w
        ymin = np.minimum(y0, y1)
        ymax = np.maximum(y0, y1)
        dirs_all = np.where(y1 > y0, 1.0, -1.0)
        for r, yc in enumerate(ys):
            hit = (ymin <= yc) & (yc < ymax)
            if not hit.any():
                continue
            xa, ya, xb, yb = x0[hit], y0[hit], x1[hit], y1[hit]
            tpar = (yc - ya) / (yb - ya)
            xc = xa + tpar * (xb - xa)
            order = np.argsort(xc, kind="stable")
            xc = xc[order]
            wind = np.cumsum(dirs_all[hit][order])
            inside = wind != 0
            coverage[r] = _row_coverage(xc, inside, xs)
    pix = coverage.reshape(height, _SS, width, _SS).mean(axis=(1, 3))
    pix = np.clip(pix, 0.0, 1.0)
    return RasterImage(width=width, height=height, pixels=pix)


def _row_coverage(xc: np.ndarray, inside: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Mark subsample centers covered by the nonzero-winding intervals."""
    bounds: list[float] = []
    open_at = None
    for i, flag in enumerate(inside):
        if flag and open_at is None:
            open_at = xc[i]
        elif not flag and open_at is not None:
            bounds.extend((open_at, xc[i]))
            open_at = None
    if open_at is not None and len(xc):
        bounds.extend((open_at, xc[-1]))
    if not bounds:
        return np.zeros_like(xs)
    idx = np.searchsorted(np.asarray(bounds), xs)
    return (idx % 2).astype(np.float64)


# ---------------------------------------------------------------------------
# Metrics


def _check_dims(a: RasterImage, b: RasterImage):
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"image dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def mse(a: RasterImage, b: RasterImage) -> float:
    _check_dims(a, b)
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    return float(np.mean(diff * diff))


PSNR_CAP = 100.0


def psnr(a: RasterImage, b: RasterImage) -> float:
    """Peak signal-to-noise ratio for unit dynamic range, capped at 100 dB."""
    m = mse(a, b)
    if m < 1e-10:
        return PSNR_CAP
    return float(10.0 * math.log10(1.0 / m))


def ssim(a: RasterImage, b: RasterImage) -> float:
    """Structural similarity with the standard 11x11 Gaussian window.

    sigma = 1.5, k1 = 0.01, k2 = 0.03, dynamic range 1; the SSIM map is
    averaged over the valid (fully-windowed) region.
    """
    _check_dims(a, b)
    x = a.pixels.astype(np.float64)
    y = b.pixels.astype(np.float64)
    win = _gaussian_window(11, 1.5)
    c1 = 0.01**2
    c2 = 0.03**2

    mu_x = _filter_valid(x, win)
    mu_y = _filter_valid(y, win)
    xx = _filter_valid(x * x, win) - mu_x * mu_x
    yy = _filter_valid(y * y, win) - mu_y * mu_y
    xy = _filter_valid(x * y, win) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    from scipy.signal import convolve2d

    return convolve2d(img, win, mode="valid")


def iou(a: RasterImage, b: RasterImage, threshold: float = 0.5) -> float:
    """Intersection-over-union of the binarized ink masks."""
    _check_dims(a, b)
    ma = a.pixels >= threshold
    mb = b.pixels >= threshold
    union = np.logical_or(ma, mb).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(ma, mb).sum() / union)


def metrics_report(pred: RasterImage, truth: RasterImage) -> dict:
    return {"mse": mse(pred, truth), "psnr": psnr(pred, truth), "ssim": ssim(pred, truth)}


def metrics_report_json(pred: RasterImage, truth: RasterImage) -> str:
    return json.dumps(metrics_report(pred, truth))


# ---------------------------------------------------------------------------
# PNG I/O (8-bit grayscale, 255 = ink)


def save_png(img: RasterImage, path) -> None:
    arr = np.round(np.clip(img.pixels, 0, 1) * 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_png(path) -> RasterImage:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return RasterImage.from_array(arr)


def png_bytes(img: RasterImage) -> bytes:
    import io

    arr = np.round(np.clip(img.pixels, 0, 1) * 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def from_png_bytes(data: bytes) -> RasterImage:
    import io

    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return RasterImage.from_array(arr)
