"""SVG path parsing and the cubic Bezier geometry kernel.

All glyph geometry lives in em coordinates: a normalized [0,1]^2 box with y
increasing upward.  Every curve is stored as a cubic Bezier segment; lines and
quadratics are degree-elevated at parse time so downstream code deals with a
single primitive.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

Point = tuple[float, float]

COUNTERCLOCKWISE = "counterclockwise"
CLOCKWISE = "clockwise"

# Commands the parser accepts.  Arcs are deliberately rejected: glyph outlines
# extracted from fonts contain only lines and Bezier curves.
_SUPPORTED = set("MmLlCcQqZzHhVv")
_UNSUPPORTED = set("AaSsTt")

_ARITY = {
    "MoveTo": 1,
    "LineTo": 1,
    "QuadTo": 2,
    "CubicTo": 3,
    "ClosePath": 0,
}


class PathSyntaxError(ValueError):
    """Malformed SVG path data; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class DegenerateSegmentError(ValueError):
    """Raised when a geometric query is meaningless on a collapsed segment."""


@dataclass(frozen=True)
class PathCommand:
    """One parsed path command with its absolute coordinates in source units."""

    kind: str
    points: tuple[Point, ...]

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValueError(f"unknown command kind {self.kind!r}")
        if len(self.points) != _ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} expects {_ARITY[self.kind]} point(s), got {len(self.points)}"
            )


@dataclass(frozen=True)
class CubicSegment:
    """Cubic Bezier segment with control points in em units."""

    p0: Point
    p1: Point
    p2: Point
    p3: Point

    def __post_init__(self):
        for p in (self.p0, self.p1, self.p2, self.p3):
            if not (math.isfinite(p[0]) and math.isfinite(p[1])):
                raise ValueError(f"non-finite control point {p}")

    @property
    def points(self) -> tuple[Point, Point, Point, Point]:
        return (self.p0, self.p1, self.p2, self.p3)

    def reversed(self) -> "CubicSegment":
        return CubicSegment(self.p3, self.p2, self.p1, self.p0)


@dataclass(frozen=True)
class Contour:
    """Closed loop of cubic segments.

    Closure (segment[i].p3 == segment[i+1].p0, cyclically) is checked at
    construction; orientation is derived from the signed area of a sampled
    polygon, with positive area meaning counterclockwise in the y-up frame.
    """

    segments: tuple[CubicSegment, ...]
    orientation: str

    def __post_init__(self):
        if not self.segments:
            raise ValueError("contour needs at least one segment")
        for a, b in zip(self.segments, self.segments[1:] + self.segments[:1]):
            if math.dist(a.p3, b.p0) > 1e-9:
                raise ValueError(f"contour not closed: gap {a.p3} -> {b.p0}")
        if self.orientation not in (COUNTERCLOCKWISE, CLOCKWISE):
            raise ValueError(f"bad orientation {self.orientation!r}")

    @staticmethod
    def from_segments(segments: Sequence[CubicSegment]) -> "Contour":
        area = _signed_area(segments)
        orient = COUNTERCLOCKWISE if area >= 0 else CLOCKWISE
        return Contour(tuple(segments), orient)

    def reversed(self) -> "Contour":
        segs = [s.reversed() for s in reversed(self.segments)]
        return Contour.from_segments(segs)

    @property
    def start(self) -> Point:
        return self.segments[0].p0


@dataclass(frozen=True)
class GlyphOutline:
    """Parsed vector outline: ordered contours of cubic segments."""

    contours: tuple[Contour, ...]
    glyph_id: int = 1
    source_units_per_em: float = 1.0

    def __post_init__(self):
        if not self.contours:
            raise ValueError("outline needs at least one contour")
        if self.source_units_per_em <= 0:
            raise ValueError("units_per_em must be positive")


# ---------------------------------------------------------------------------
# Parsing


_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class _Scanner:
    """Token scanner over path data, tracking byte offsets for errors."""

    def __init__(self, data: str):
        self.data = data
        self.pos = 0

    def _skip_separators(self):
        n = len(self.data)
        while self.pos < n and (self.data[self.pos].isspace() or self.data[self.pos] == ","):
            self.pos += 1

    def peek_command(self) -> str | None:
        self._skip_separators()
        if self.pos >= len(self.data):
            return None
        ch = self.data[self.pos]
        return ch if ch.isalpha() else ""

    def take_command(self) -> str:
        ch = self.data[self.pos]
        self.pos += 1
        return ch

    def take_number(self) -> float:
        self._skip_separators()
        m = _NUMBER_RE.match(self.data, self.pos)
        if m is None:
            raise PathSyntaxError("expected number", self.pos)
        self.pos = m.end()
        return float(m.group())


def parse_path(path_data: str, units_per_em: float, glyph_id: int = 1) -> GlyphOutline:
    """Parse SVG path data into a glyph outline.

    Lines and quadratics are represented exactly as cubics via degree
    elevation; coordinates are scaled by 1/units_per_em.  Each MoveTo opens a
    new contour and unclosed contours are closed with a line segment.  Only
    M/m, L/l, C/c, Q/q, H/h, V/v, Z/z are accepted; elliptical arcs raise.
    """
    if units_per_em <= 0:
        raise ValueError("units_per_em must be positive")
    if not path_data.strip():
        raise PathSyntaxError("empty path", 0)

    sc = _Scanner(path_data)
    contours: list[list[CubicSegment]] = []
    current: list[CubicSegment] | None = None
    cur: Point = (0.0, 0.0)
    start: Point = (0.0, 0.0)
    command = ""

    def pair(relative: bool) -> Point:
        x = sc.take_number()
        y = sc.take_number()
        return (cur[0] + x, cur[1] + y) if relative else (x, y)

    def close_current(explicit: bool):
        nonlocal current, cur
        if current is None:
            return
        if current and math.dist(cur, start) > 1e-12:
            current.append(_line_cubic(cur, start))
        if current:
            contours.append(current)
        current = None
        if explicit:
            cur = start

    while True:
        kind = sc.peek_command()
        if kind is None:
            break
        if kind != "":
            at = sc.pos
            command = sc.take_command()
            if command in _UNSUPPORTED:
                raise PathSyntaxError(f"unsupported command {command!r}", at)
            if command not in _SUPPORTED:
                raise PathSyntaxError(f"unknown command {command!r}", at)
        elif command == "":
            raise PathSyntaxError("path must start with a command", sc.pos)
        # A bare coordinate after M/m continues as implicit LineTo.
        effective = command
        if kind == "" and command in "Mm":
            effective = "L" if command == "M" else "l"

        rel = effective.islower()
        op = effective.upper()
        if op == "M":
            close_current(explicit=False)
            cur = pair(rel)
            start = cur
            current = []
        elif op == "Z":
            if current is None:
                raise PathSyntaxError("Z without open contour", sc.pos)
            close_current(explicit=True)
            command = ""
        else:
            if current is None:
                raise PathSyntaxError(f"{op} before MoveTo", sc.pos)
            if op == "L":
                nxt = pair(rel)
                current.append(_line_cubic(cur, nxt))
                cur = nxt
            elif op == "H":
                x = sc.take_number()
                nxt = (cur[0] + x if rel else x, cur[1])
                current.append(_line_cubic(cur, nxt))
                cur = nxt
            elif op == "V":
                y = sc.take_number()
                nxt = (cur[0], cur[1] + y if rel else y)
                current.append(_line_cubic(cur, nxt))
                cur = nxt
            elif op == "Q":
                q1 = pair(rel)
                q2 = pair(rel)
                current.append(_quad_cubic(cur, q1, q2))
                cur = q2
            elif op == "C":
                c1 = pair(rel)
                c2 = pair(rel)
                c3 = pair(rel)
                current.append(CubicSegment(cur, c1, c2, c3))
                cur = c3

    close_current(explicit=False)
    contours = [c for c in contours if c]
    if not contours:
        raise PathSyntaxError("path has no drawable contour", len(path_data))

    scale = 1.0 / units_per_em
    out = []
    for segs in contours:
        scaled = [
            CubicSegment(*[(p[0] * scale, p[1] * scale) for p in s.points]) for s in segs
        ]
        out.append(Contour.from_segments(scaled))
    return GlyphOutline(tuple(out), glyph_id=glyph_id, source_units_per_em=units_per_em)


def _line_cubic(a: Point, b: Point) -> CubicSegment:
    third = ((b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0)
    return CubicSegment(
        a,
        (a[0] + third[0], a[1] + third[1]),
        (a[0] + 2 * third[0], a[1] + 2 * third[1]),
        b,
    )


def _quad_cubic(q0: Point, q1: Point, q2: Point) -> CubicSegment:
    # Exact degree elevation: cubic controls at Q0 + 2/3 (Q1-Q0), Q2 + 2/3 (Q1-Q2).
    c1 = (q0[0] + 2.0 / 3.0 * (q1[0] - q0[0]), q0[1] + 2.0 / 3.0 * (q1[1] - q0[1]))
    c2 = (q2[0] + 2.0 / 3.0 * (q1[0] - q2[0]), q2[1] + 2.0 / 3.0 * (q1[1] - q2[1]))
    return CubicSegment(q0, c1, c2, q2)


# ---------------------------------------------------------------------------
# Geometry kernel


def bezier_eval(seg: CubicSegment, t: float) -> Point:
    """Point on the curve, B(t) for t in [0,1]."""
    u = 1.0 - t
    uu, tt = u * u, t * t
    a, b, c, d = u * uu, 3.0 * uu * t, 3.0 * u * tt, t * tt
    return (
        a * seg.p0[0] + b * seg.p1[0] + c * seg.p2[0] + d * seg.p3[0],
        a * seg.p0[1] + b * seg.p1[1] + c * seg.p2[1] + d * seg.p3[1],
    )


def bezier_derivative(seg: CubicSegment, t: float) -> Point:
    u = 1.0 - t
    d0 = (seg.p1[0] - seg.p0[0], seg.p1[1] - seg.p0[1])
    d1 = (seg.p2[0] - seg.p1[0], seg.p2[1] - seg.p1[1])
    d2 = (seg.p3[0] - seg.p2[0], seg.p3[1] - seg.p2[1])
    return (
        3.0 * (u * u * d0[0] + 2.0 * u * t * d1[0] + t * t * d2[0]),
        3.0 * (u * u * d0[1] + 2.0 * u * t * d1[1] + t * t * d2[1]),
    )


def bezier_second_derivative(seg: CubicSegment, t: float) -> Point:
    u = 1.0 - t
    a = (seg.p2[0] - 2 * seg.p1[0] + seg.p0[0], seg.p2[1] - 2 * seg.p1[1] + seg.p0[1])
    b = (seg.p3[0] - 2 * seg.p2[0] + seg.p1[0], seg.p3[1] - 2 * seg.p2[1] + seg.p1[1])
    return (6.0 * (u * a[0] + t * b[0]), 6.0 * (u * a[1] + t * b[1]))


def bezier_tangent(seg: CubicSegment, t: float) -> Point:
    """Unit tangent B'(t)/|B'(t)|, falling back to the chord for cusps."""
    dx, dy = bezier_derivative(seg, t)
    norm = math.hypot(dx, dy)
    if norm < 1e-9:
        dx = seg.p3[0] - seg.p0[0]
        dy = seg.p3[1] - seg.p0[1]
        norm = math.hypot(dx, dy)
        if norm < 1e-12:
            raise DegenerateSegmentError("tangent of a point segment is undefined")
    return (dx / norm, dy / norm)


def bezier_curvature(seg: CubicSegment, t: float) -> float:
    """Unsigned curvature |B' x B''| / |B'|^3 (0 for a collapsed derivative)."""
    dx, dy = bezier_derivative(seg, t)
    ddx, ddy = bezier_second_derivative(seg, t)
    speed = math.hypot(dx, dy)
    if speed < 1e-12:
        return 0.0
    return abs(dx * ddy - dy * ddx) / speed**3


def split_segment(seg: CubicSegment, t: float) -> tuple[CubicSegment, CubicSegment]:
    """De Casteljau subdivision at parameter t."""

    def lerp(a: Point, b: Point) -> Point:
        return (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t)

    p01 = lerp(seg.p0, seg.p1)
    p12 = lerp(seg.p1, seg.p2)
    p23 = lerp(seg.p2, seg.p3)
    p012 = lerp(p01, p12)
    p123 = lerp(p12, p23)
    mid = lerp(p012, p123)
    return (
        CubicSegment(seg.p0, p01, p012, mid),
        CubicSegment(mid, p123, p23, seg.p3),
    )


def arc_length(seg: CubicSegment, tol: float = 1e-6) -> float:
    """Arc length by adaptive de Casteljau subdivision.

    The control polygon bounds the length from above and the chord from
    below; subdivision stops once the two agree to the requested relative
    tolerance.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def recurse(s: CubicSegment, depth: int) -> float:
        chord = math.dist(s.p0, s.p3)
        poly = (
            math.dist(s.p0, s.p1) + math.dist(s.p1, s.p2) + math.dist(s.p2, s.p3)
        )
        if poly < 1e-15:
            return 0.0
        if depth >= 40 or (poly - chord) <= tol * poly:
            return 0.5 * (chord + poly)
        left, right = split_segment(s, 0.5)
        return recurse(left, depth + 1) + recurse(right, depth + 1)

    return recurse(seg, 0)


def _flatten_segment(
    seg: CubicSegment, tol: float
) -> list[tuple[float, Point]]:
    """Piecewise-linear approximation as (t, point) pairs, endpoints included.

    Flatness is measured as control-point deviation from the chord; the
    recursion keeps parameter values so results can index back into the curve.
    """
    out: list[tuple[float, Point]] = [(0.0, seg.p0)]

    def flat_enough(s: CubicSegment) -> bool:
        ax, ay = s.p0
        bx, by = s.p3
        ux, uy = bx - ax, by - ay
        d = math.hypot(ux, uy)
        if d < 1e-15:
            return (
                math.dist(s.p0, s.p1) < tol and math.dist(s.p0, s.p2) < tol
            )
        d1 = abs((s.p1[0] - ax) * uy - (s.p1[1] - ay) * ux) / d
        d2 = abs((s.p2[0] - ax) * uy - (s.p2[1] - ay) * ux) / d
        return max(d1, d2) <= tol

    def recurse(s: CubicSegment, t0: float, t1: float, depth: int):
        if depth >= 24 or flat_enough(s):
            out.append((t1, s.p3))
            return
        left, right = split_segment(s, 0.5)
        tm = 0.5 * (t0 + t1)
        recurse(left, t0, tm, depth + 1)
        recurse(right, tm, t1, depth + 1)

    recurse(seg, 0.0, 1.0, 0)
    return out


class ArcLengthTable:
    """Arc-length parameterization of a contour.

    Built from an adaptive flattening; maps arc position s in [0, total) to an
    exact (segment index, t) location.  Positions and tangents are then
    evaluated on the true curve, never on the flattened polyline.
    """

    def __init__(self, contour: Contour, tol: float = 1e-5):
        iseg: list[int] = []
        it0: list[float] = []
        it1: list[float] = []
        lengths: list[float] = []
        for i, seg in enumerate(contour.segments):
            flat = _flatten_segment(seg, tol)
            for (ta, pa), (tb, pb) in zip(flat, flat[1:]):
                iseg.append(i)
                it0.append(ta)
                it1.append(tb)
                lengths.append(math.dist(pa, pb))
        self.contour = contour
        self._seg = np.array(iseg, dtype=np.int64)
        self._t0 = np.array(it0, dtype=np.float64)
        self._t1 = np.array(it1, dtype=np.float64)
        self._cum = np.concatenate([[0.0], np.cumsum(np.array(lengths))])
        # First interval index of each segment, for the inverse query.
        self._seg_first = np.searchsorted(self._seg, np.arange(len(contour.segments)))

    @property
    def total_length(self) -> float:
        return float(self._cum[-1])

    @property
    def ctrl(self) -> np.ndarray:
        """Stacked control points (n_segments, 4, 2), built lazily."""
        arr = getattr(self, "_ctrl", None)
        if arr is None:
            arr = np.array(
                [s.points for s in self.contour.segments], dtype=np.float64
            )
            self._ctrl = arr
        return arr

    def locate(self, s: float) -> tuple[int, float]:
        """Arc position -> (segment index, parameter t), cyclic in s."""
        seg, t = self.locate_many(np.array([s]))
        return int(seg[0]), float(t[0])

    def locate_many(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        total = self.total_length
        if total <= 0:
            raise DegenerateSegmentError("contour has zero length")
        s = np.asarray(s, dtype=np.float64) % total
        k = np.searchsorted(self._cum, s, side="right") - 1
        k = np.clip(k, 0, len(self._seg) - 1)
        span = self._cum[k + 1] - self._cum[k]
        frac = np.where(span > 0, (s - self._cum[k]) / np.where(span > 0, span, 1.0), 0.0)
        t = self._t0[k] + frac * (self._t1[k] - self._t0[k])
        return self._seg[k], t

    def point_at(self, s: float) -> Point:
        i, t = self.locate(s)
        return bezier_eval(self.contour.segments[i], t)

    def tangent_at(self, s: float) -> Point:
        i, t = self.locate(s)
        return bezier_tangent(self.contour.segments[i], t)

    def points_many(self, s: np.ndarray) -> np.ndarray:
        seg, t = self.locate_many(s)
        return _eval_many(self.ctrl, seg, t)

    def tangents_many(self, s: np.ndarray) -> np.ndarray:
        seg, t = self.locate_many(s)
        d = _derivative_many(self.ctrl, seg, t)
        norm = np.linalg.norm(d, axis=1)
        weak = norm < 1e-9
        if weak.any():
            chord = self.ctrl[seg[weak], 3] - self.ctrl[seg[weak], 0]
            d[weak] = chord
            norm = np.linalg.norm(d, axis=1)
            if (norm < 1e-12).any():
                raise DegenerateSegmentError("tangent of a point segment is undefined")
        return d / norm[:, None]

    def curvatures_many(self, s: np.ndarray) -> np.ndarray:
        seg, t = self.locate_many(s)
        d = _derivative_many(self.ctrl, seg, t)
        dd = _second_derivative_many(self.ctrl, seg, t)
        speed = np.linalg.norm(d, axis=1)
        cross = np.abs(d[:, 0] * dd[:, 1] - d[:, 1] * dd[:, 0])
        out = np.zeros_like(speed)
        ok = speed >= 1e-12
        out[ok] = cross[ok] / speed[ok] ** 3
        return out

    def arc_of(self, seg_index: int, t: float) -> float:
        """Inverse of locate: arc position of a (segment, t) location."""
        n_seg = len(self.contour.segments)
        if not 0 <= seg_index < n_seg:
            raise IndexError(f"segment {seg_index} out of range")
        lo = int(self._seg_first[seg_index])
        hi = int(self._seg_first[seg_index + 1]) if seg_index + 1 < n_seg else len(self._seg)
        ts = self._t0[lo:hi]
        k = lo + max(0, int(np.searchsorted(ts, t, side="right")) - 1)
        span = self._t1[k] - self._t0[k]
        frac = 0.0 if span <= 0 else (t - self._t0[k]) / span
        frac = min(max(frac, 0.0), 1.0)
        return float(self._cum[k] + frac * (self._cum[k + 1] - self._cum[k]))


def _eval_many(ctrl: np.ndarray, seg: np.ndarray, t: np.ndarray) -> np.ndarray:
    c = ctrl[seg]
    u = 1.0 - t
    basis = np.stack([u**3, 3 * u**2 * t, 3 * u * t**2, t**3], axis=-1)
    return np.einsum("nk,nkd->nd", basis, c)


def _derivative_many(ctrl: np.ndarray, seg: np.ndarray, t: np.ndarray) -> np.ndarray:
    c = ctrl[seg]
    diff = 3.0 * (c[:, 1:] - c[:, :-1])
    u = 1.0 - t
    basis = np.stack([u**2, 2 * u * t, t**2], axis=-1)
    return np.einsum("nk,nkd->nd", basis, diff)


def _second_derivative_many(ctrl: np.ndarray, seg: np.ndarray, t: np.ndarray) -> np.ndarray:
    c = ctrl[seg]
    a = 6.0 * (c[:, 2] - 2 * c[:, 1] + c[:, 0])
    b = 6.0 * (c[:, 3] - 2 * c[:, 2] + c[:, 1])
    u = 1.0 - t
    return u[:, None] * a + t[:, None] * b


def contour_length(contour: Contour, tol: float = 1e-6) -> float:
    return sum(arc_length(seg, tol) for seg in contour.segments)


def sample_uniform(contour: Contour, k: int) -> list[tuple[Point, Point]]:
    """k (point, unit tangent) samples at equal arc spacing from the start."""
    if k < 2:
        raise ValueError("k must be at least 2")
    table = ArcLengthTable(contour)
    total = table.total_length
    if total < 1e-9:
        raise DegenerateSegmentError("contour too short to sample")
    step = total / k
    return [
        (table.point_at(i * step), table.tangent_at(i * step)) for i in range(k)
    ]


def _signed_area(segments: Sequence[CubicSegment], samples_per_seg: int = 16) -> float:
    pts = []
    for seg in segments:
        for j in range(samples_per_seg):
            pts.append(bezier_eval(seg, j / samples_per_seg))
    arr = np.asarray(pts)
    x, y = arr[:, 0], arr[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def signed_area(contour: Contour) -> float:
    """Signed polygon area of the sampled contour (positive = CCW, y-up)."""
    return _signed_area(contour.segments)


# ---------------------------------------------------------------------------
# Transforms and normalization


def map_outline(outline: GlyphOutline, fn: Callable[[Point], Point]) -> GlyphOutline:
    """Apply a point transform to every control point, refreshing orientation."""
    contours = []
    for c in outline.contours:
        segs = [CubicSegment(*[fn(p) for p in s.points]) for s in c.segments]
        contours.append(Contour.from_segments(segs))
    return GlyphOutline(
        tuple(contours),
        glyph_id=outline.glyph_id,
        source_units_per_em=outline.source_units_per_em,
    )


def outline_bbox(outline: GlyphOutline, tol: float = 1e-4) -> tuple[float, float, float, float]:
    """Tight curve bounding box (xmin, ymin, xmax, ymax) via flattening."""
    xs: list[float] = []
    ys: list[float] = []
    for c in outline.contours:
        for seg in c.segments:
            for _, (x, y) in _flatten_segment(seg, tol):
                xs.append(x)
                ys.append(y)
    return min(xs), min(ys), max(xs), max(ys)


def normalize_outline(outline: GlyphOutline, margin: float = 0.05) -> GlyphOutline:
    """Fit the glyph into [0,1]^2: uniform scale, centered, with a margin.

    Aspect ratio is preserved; the larger bounding-box dimension maps to
    1 - 2*margin.
    """
    x0, y0, x1, y1 = outline_bbox(outline)
    w, h = x1 - x0, y1 - y0
    extent = max(w, h)
    if extent < 1e-12:
        raise ValueError("outline has zero extent")
    scale = (1.0 - 2.0 * margin) / extent
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)

    def fn(p: Point) -> Point:
        return (0.5 + (p[0] - cx) * scale, 0.5 + (p[1] - cy) * scale)

    return map_outline(outline, fn)


# ---------------------------------------------------------------------------
# Serialization


def outline_to_json(outline: GlyphOutline) -> str:
    obj = {
        "glyph_id": outline.glyph_id,
        "units_per_em": outline.source_units_per_em,
        "contours": [
            {
                "orientation": c.orientation,
                "segments": [[list(p) for p in s.points] for s in c.segments],
            }
            for c in outline.contours
        ],
    }
    return json.dumps(obj)


def outline_from_json(text: str) -> GlyphOutline:
    obj = json.loads(text)
    contours = []
    for c in obj["contours"]:
        segs = [CubicSegment(*[tuple(p) for p in pts]) for pts in c["segments"]]
        contours.append(Contour(tuple(segs), c["orientation"]))
    return GlyphOutline(
        tuple(contours),
        glyph_id=obj.get("glyph_id", 1),
        source_units_per_em=obj.get("units_per_em", 1.0),
    )
