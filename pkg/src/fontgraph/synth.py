"""Parametric synthetic block-capital fonts.

Letters are built from rectangles and thick line strokes with shapely boolean
ops, so the contour topology of each glyph always matches its graph template
(e.g. 'A' has an outer loop plus one hole, 'B' has two holes).  A font is a
point in a small style space: stroke width, slant, serif size and corner
radius.  The generator exists so the whole pipeline can be exercised and
trained hermetically, without shipping third-party font data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from shapely import affinity
from shapely.geometry import LineString, MultiPolygon, Polygon, box
from shapely.geometry.polygon import orient

from .glyphgraph import build_template, glyph_id_of

UNITS_PER_EM = 1.0


class GlyphGenerationError(ValueError):
    pass


@dataclass(frozen=True)
class SynthFontParams:
    stroke_width: float = 0.11
    slant: float = 0.0
    serif_size: float = 0.0
    corner_radius: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.stroke_width <= 0.3:
            raise ValueError("stroke_width must be in (0, 0.3]")
        if not -0.5 <= self.slant <= 0.5:
            raise ValueError("slant must be in [-0.5, 0.5]")
        if self.serif_size < 0 or self.corner_radius < 0:
            raise ValueError("serif_size and corner_radius must be nonnegative")


def _bar(p, q, w) -> Polygon:
    """Thick stroke from p to q: a rectangle of width w along the segment."""
    return LineString([p, q]).buffer(w / 2.0, cap_style="flat", join_style="mitre")


def _letter_geometry(letter: str, p: SynthFontParams) -> Polygon | MultiPolygon:
    """Upright letter shape on a roughly [0, 0.68] x [0, 1] design box."""
    w = p.stroke_width
    s = p.serif_size
    W = 0.68
    cx = W / 2
    feet: list[Polygon] = []

    def foot(x_lo, x_hi, at_top=False):
        """Slab serif under (or above) a stem terminal."""
        if s <= 0:
            return
        h = min(0.75 * w, 0.09)
        y0, y1 = (1.0 - h, 1.0) if at_top else (0.0, h)
        feet.append(box(x_lo - s, y0, x_hi + s, y1))

    if letter == "A":
        # Apex separation scales with the stroke so the bars always overlap
        # at the top while leaving the counter open above the crossbar.
        apex = 0.3 * w
        left = _bar((cx - apex, 1.0 - w / 2), (0.055, 0.03), w)
        right = _bar((cx + apex, 1.0 - w / 2), (W - 0.055, 0.03), w)
        cross = box(0.13, 0.30, W - 0.13, 0.30 + w)
        g = left.union(right).union(cross)
    elif letter == "B":
        body = box(0.0, 0.0, 0.60, 1.0)
        h_hi = box(w, 0.5 + w / 2, 0.60 - w, 1.0 - w)
        h_lo = box(w, w, 0.60 - w, 0.5 - w / 2)
        foot(0.0, w)
        foot(0.0, w, at_top=True)
        g = body.difference(h_hi).difference(h_lo)
    elif letter == "C":
        g = box(0.0, 0.0, W, 1.0).difference(box(w, w, W + 0.1, 1.0 - w))
    elif letter == "D":
        g = box(0.0, 0.0, 0.64, 1.0).difference(box(w, w, 0.64 - w, 1.0 - w))
        foot(0.0, w)
        foot(0.0, w, at_top=True)
    elif letter == "E":
        body = box(0.0, 0.0, W, 1.0)
        n_hi = box(w, 0.5 + w / 2, W + 0.1, 1.0 - w)
        n_lo = box(w, w, W + 0.1, 0.5 - w / 2)
        g = body.difference(n_hi).difference(n_lo)
    elif letter == "F":
        stem = box(0.0, 0.0, w, 1.0)
        top = box(0.0, 1.0 - w, W, 1.0)
        mid = box(0.0, 0.5 - w / 2, 0.56, 0.5 + w / 2)
        foot(0.0, w)
        g = stem.union(top).union(mid)
    elif letter == "G":
        c = box(0.0, 0.0, W, 1.0).difference(box(w, w, W + 0.1, 1.0 - w))
        hook = box(W - w, 0.0, W, 0.42)
        tick = box(0.36, 0.42 - w, W, 0.42)
        g = c.union(hook).union(tick)
    elif letter == "H":
        l = box(0.0, 0.0, w, 1.0)
        r = box(W - w, 0.0, W, 1.0)
        mid = box(0.0, 0.5 - w / 2, W, 0.5 + w / 2)
        foot(0.0, w)
        foot(W - w, W)
        foot(0.0, w, at_top=True)
        foot(W - w, W, at_top=True)
        g = l.union(r).union(mid)
    elif letter == "I":
        g = box(cx - w / 2, 0.0, cx + w / 2, 1.0)
        foot(cx - w / 2, cx + w / 2)
        foot(cx - w / 2, cx + w / 2, at_top=True)
    elif letter == "J":
        stem = box(W - 0.2 - w, 0.0, W - 0.2, 1.0)
        bottom = box(0.08, 0.0, W - 0.2, w)
        hook = box(0.08, 0.0, 0.08 + w, 0.28)
        foot(W - 0.2 - w, W - 0.2, at_top=True)
        g = stem.union(bottom).union(hook)
    elif letter == "K":
        stem = box(0.0, 0.0, w, 1.0)
        up = _bar((0.8 * w, 0.5), (W, 1.0 - 0.4 * w), w)
        down = _bar((0.8 * w, 0.5), (W, 0.4 * w), w)
        foot(0.0, w)
        foot(0.0, w, at_top=True)
        g = stem.union(up).union(down)
    elif letter == "L":
        g = box(0.0, 0.0, w, 1.0).union(box(0.0, 0.0, W, w))
        foot(0.0, w, at_top=True)
    elif letter == "M":
        l = box(0.0, 0.0, w, 1.0)
        r = box(W - w, 0.0, W, 1.0)
        dl = _bar((w * 0.6, 1.0 - w * 0.4), (cx, 0.42), w * 0.92)
        dr = _bar((W - w * 0.6, 1.0 - w * 0.4), (cx, 0.42), w * 0.92)
        foot(0.0, w)
        foot(W - w, W)
        g = l.union(r).union(dl).union(dr)
    elif letter == "N":
        l = box(0.0, 0.0, w, 1.0)
        r = box(W - w, 0.0, W, 1.0)
        diag = _bar((w * 0.55, 1.0 - w * 0.4), (W - w * 0.55, w * 0.4), w * 0.95)
        foot(0.0, w)
        foot(W - w, W, at_top=True)
        g = l.union(r).union(diag)
    elif letter == "O":
        g = box(0.0, 0.0, W, 1.0).difference(box(w, w, W - w, 1.0 - w))
    elif letter == "P":
        stem = box(0.0, 0.0, w, 1.0)
        bowl = box(0.0, 0.42, 0.62, 1.0).difference(
            box(w, 0.42 + w, 0.62 - w, 1.0 - w)
        )
        foot(0.0, w)
        g = stem.union(bowl)
    elif letter == "Q":
        ring = box(0.0, 0.06, W, 1.0).difference(box(w, 0.06 + w, W - w, 1.0 - w))
        tail = _bar((0.42, 0.30), (W - 0.02, 0.0), w)
        g = ring.union(tail)
    elif letter == "R":
        stem = box(0.0, 0.0, w, 1.0)
        bowl = box(0.0, 0.46, 0.62, 1.0).difference(
            box(w, 0.46 + w, 0.62 - w, 1.0 - w)
        )
        leg = _bar((0.30, 0.50), (W, 0.0 + 0.3 * w), w)
        foot(0.0, w)
        g = stem.union(bowl).union(leg)
    elif letter == "S":
        body = box(0.0, 0.0, W, 1.0)
        n_hi = box(w, 0.5 + w / 2, W + 0.1, 1.0 - w)
        n_lo = box(-0.1, w, W - w, 0.5 - w / 2)
        g = body.difference(n_hi).difference(n_lo)
    elif letter == "T":
        g = box(0.0, 1.0 - w, W, 1.0).union(box(cx - w / 2, 0.0, cx + w / 2, 1.0))
        foot(cx - w / 2, cx + w / 2)
    elif letter == "U":
        l = box(0.0, 0.0, w, 1.0)
        r = box(W - w, 0.0, W, 1.0)
        bottom = box(0.0, 0.0, W, w)
        foot(0.0, w, at_top=True)
        foot(W - w, W, at_top=True)
        g = l.union(r).union(bottom)
    elif letter == "V":
        left = _bar((w * 0.55, 1.0 - w * 0.4), (cx, w * 0.45), w)
        right = _bar((W - w * 0.55, 1.0 - w * 0.4), (cx, w * 0.45), w)
        g = left.union(right)
    elif letter == "W":
        q = W / 4
        pts = [
            (w * 0.5, 1.0 - w * 0.4),
            (q, w * 0.45),
            (cx, 0.62),
            (W - q, w * 0.45),
            (W - w * 0.5, 1.0 - w * 0.4),
        ]
        g = _bar(pts[0], pts[1], w * 0.9)
        for a, b in zip(pts[1:], pts[2:]):
            g = g.union(_bar(a, b, w * 0.9))
    elif letter == "X":
        d1 = _bar((w * 0.5, 1.0 - w * 0.4), (W - w * 0.5, w * 0.4), w)
        d2 = _bar((W - w * 0.5, 1.0 - w * 0.4), (w * 0.5, w * 0.4), w)
        g = d1.union(d2)
    elif letter == "Y":
        left = _bar((w * 0.5, 1.0 - w * 0.4), (cx, 0.5), w)
        right = _bar((W - w * 0.5, 1.0 - w * 0.4), (cx, 0.5), w)
        stem = box(cx - w / 2, 0.0, cx + w / 2, 0.5 + w * 0.3)
        foot(cx - w / 2, cx + w / 2)
        g = left.union(right).union(stem)
    elif letter == "Z":
        top = box(0.0, 1.0 - w, W, 1.0)
        bottom = box(0.0, 0.0, W, w)
        diag = _bar((W - w * 0.7, 1.0 - w * 0.5), (w * 0.7, w * 0.5), w)
        g = top.union(bottom).union(diag)
    else:
        raise GlyphGenerationError(f"unsupported glyph {letter!r}")

    for f in feet:
        g = g.union(f)
    return g


def _round_corners(g, radius: float, stroke_width: float):
    """Opening-style rounding: erode then dilate with round joins.

    The radius is clamped well below the stroke width so thin features never
    collapse or change topology.
    """
    r = min(radius, 0.3 * stroke_width)
    if r <= 1e-6:
        return g
    return g.buffer(-r, join_style="round", quad_segs=4).buffer(
        r, join_style="round", quad_segs=4
    )


def _ring_to_path(coords) -> str:
    pts = list(coords)
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    head = f"M {pts[0][0]!r} {pts[0][1]!r} "
    body = " ".join(f"L {x!r} {y!r}" for x, y in pts[1:])
    return head + body + " Z"


def glyph_path(letter: str, params: SynthFontParams) -> str:
    """SVG path data for one letter, y-up, 1 unit per em."""
    g = _letter_geometry(letter, params)
    g = _round_corners(g, params.corner_radius, params.stroke_width)
    if params.slant != 0.0:
        g = affinity.affine_transform(g, [1.0, params.slant, 0.0, 1.0, 0.0, 0.0])
    if isinstance(g, MultiPolygon):
        raise GlyphGenerationError(
            f"{letter}: geometry split into {len(g.geoms)} pieces"
        )
    g = orient(g, sign=1.0)  # exterior CCW, holes CW
    expected = len(build_template(glyph_id_of(letter)).contours)
    got = 1 + len(g.interiors)
    if got != expected:
        raise GlyphGenerationError(
            f"{letter}: produced {got} contour(s), template expects {expected}"
        )
    parts = [_ring_to_path(g.exterior.coords)]
    parts += [_ring_to_path(ring.coords) for ring in g.interiors]
    return " ".join(parts)


def generate_synth_font(
    params: SynthFontParams, glyphs: str | list[str] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
) -> dict[str, str]:
    """Per-glyph SVG path strings for the requested capitals."""
    return {letter: glyph_path(letter, params) for letter in glyphs}


def random_font_params(rng: np.random.Generator) -> SynthFontParams:
    """Style draw over a range where every letter keeps its template topology."""
    return SynthFontParams(
        stroke_width=float(rng.uniform(0.07, 0.16)),
        slant=float(rng.uniform(-0.18, 0.18)),
        serif_size=float(rng.choice([0.0, rng.uniform(0.015, 0.05)])),
        corner_radius=float(rng.choice([0.0, rng.uniform(0.01, 0.04)])),
    )
