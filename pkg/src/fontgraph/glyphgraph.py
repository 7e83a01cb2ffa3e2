"""Hierarchical directed glyph graphs.

A glyph graph has three levels: contours, strokes (primary nodes), and dense
sample points (secondary nodes).  Each glyph letter has a fixed template that
fixes how many strokes each contour gets and how many secondary nodes each
stroke carries; the total is always 150 nodes so graphs of different letters
are tensor-compatible.  Ground-truth graphs are built by segmenting an outline
into strokes at geometric features and uniformly sampling each stroke.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import outline as ol

TOTAL_NODES = 150
GLYPH_COUNT = 26

# Per-letter budgets: (strokes per contour, nodes per stroke), outer first.
_TWO_CONTOUR_A = ((15, 8), (3, 10))  # A, P, R
_TWO_CONTOUR_D = ((15, 6), (4, 15))  # D, O, Q
_THREE_CONTOUR = ((15, 6), (3, 10), (3, 10))  # B
_ONE_CONTOUR = ((15, 10),)

_BUDGETS = {c: _TWO_CONTOUR_A for c in "APR"}
_BUDGETS.update({c: _TWO_CONTOUR_D for c in "DOQ"})
_BUDGETS["B"] = _THREE_CONTOUR


class GraphValidationError(ValueError):
    pass


class ContourMismatchError(ValueError):
    """Outline's contour count does not match its glyph template."""


def glyph_id_of(letter: str) -> int:
    if len(letter) != 1 or not "A" <= letter <= "Z":
        raise ValueError(f"unsupported glyph {letter!r}")
    return ord(letter) - ord("A") + 1


def glyph_letter(glyph_id: int) -> str:
    if not 1 <= glyph_id <= GLYPH_COUNT:
        raise ValueError(f"glyph_id {glyph_id} out of range [1, {GLYPH_COUNT}]")
    return chr(ord("A") + glyph_id - 1)


@dataclass(frozen=True)
class GraphTemplate:
    """Node budget and primary-node connectivity for one glyph letter."""

    glyph_id: int
    contours: tuple[tuple[int, int], ...]  # (n1_i, n2_i) per contour
    adjacency: np.ndarray  # n1_total x n1_total, 0/1, read-only

    @property
    def n1_total(self) -> int:
        return sum(n1 for n1, _ in self.contours)

    @property
    def node_count(self) -> int:
        return sum(n1 * n2 for n1, n2 in self.contours)

    def contour_stroke_ranges(self) -> list[tuple[int, int]]:
        """Primary-node index span [start, end) of each contour."""
        out, at = [], 0
        for n1, _ in self.contours:
            out.append((at, at + n1))
            at += n1
        return out

    def stroke_node_spans(self) -> list[tuple[int, int]]:
        """Secondary-node index span [start, end) of each stroke, in order."""
        out, at = [], 0
        for n1, n2 in self.contours:
            for _ in range(n1):
                out.append((at, at + n2))
                at += n2
        return out

    def contour_node_ranges(self) -> list[tuple[int, int]]:
        out, at = [], 0
        for n1, n2 in self.contours:
            out.append((at, at + n1 * n2))
            at += n1 * n2
        return out


def cycle_adjacency(contours: tuple[tuple[int, int], ...]) -> np.ndarray:
    """Per-contour directed cycles over the primary nodes.

    A two-stroke loop degenerates to a bidirectional pair and a single-stroke
    loop to a self-linkage, both of which fall out of the cyclic rule.
    """
    n1_total = sum(n1 for n1, _ in contours)
    adj = np.zeros((n1_total, n1_total), dtype=np.uint8)
    at = 0
    for n1, _ in contours:
        for i in range(n1):
            adj[at + i, at + (i + 1) % n1] = 1  # CCW traversal order
        at += n1
    adj.setflags(write=False)
    return adj


@lru_cache(maxsize=None)
def build_template(glyph_id: int) -> GraphTemplate:
    """Fixed per-letter template; budgets always total 150 nodes."""
    letter = glyph_letter(glyph_id)
    contours = _BUDGETS.get(letter, _ONE_CONTOUR)
    return GraphTemplate(
        glyph_id=glyph_id, contours=contours, adjacency=cycle_adjacency(contours)
    )


@dataclass(frozen=True)
class StrokeSegmentation:
    """Primary-node locations per contour as (segment index, t) pairs.

    Parameters are strictly increasing in traversal order; the first entry is
    the node closest to the contour's topmost point.
    """

    primary_params: tuple[tuple[tuple[int, float], ...], ...]


@dataclass(frozen=True)
class GlyphGraph:
    template: GraphTemplate
    nodes: np.ndarray  # (n, 4): x, y, tx, ty in em units
    mapping: np.ndarray | None = None  # (m, n) binary, absent for ground truth

    def __post_init__(self):
        n = self.template.node_count
        if self.nodes.shape != (n, 4):
            raise GraphValidationError(
                f"nodes shape {self.nodes.shape} != ({n}, 4)"
            )

    @property
    def adjacency(self) -> np.ndarray:
        return self.template.adjacency


# ---------------------------------------------------------------------------
# Canonical contour ordering


def canonicalize_outline(outline: ol.GlyphOutline) -> ol.GlyphOutline:
    """Order contours (outer first by |area|, inner by area then topmost y)
    and force counterclockwise traversal on every loop.

    Graph construction and alignment always run on this canonical view so node
    correspondence is deterministic across fonts.
    """
    scored = []
    for c in outline.contours:
        area = ol.signed_area(c)
        top = max(
            max(p[1] for p in s.points) for s in c.segments
        )
        scored.append((abs(area), top, c))
    # Outer = largest |area|; remaining sorted by area desc then topmost y desc.
    scored.sort(key=lambda e: (-round(e[0], 9), -round(e[1], 9)))
    ordered = []
    for _, _, c in scored:
        if c.orientation != ol.COUNTERCLOCKWISE:
            c = c.reversed()
        ordered.append(c)
    return ol.GlyphOutline(
        tuple(ordered),
        glyph_id=outline.glyph_id,
        source_units_per_em=outline.source_units_per_em,
    )


# ---------------------------------------------------------------------------
# Stroke segmentation

_CORNER_ANGLE = 0.15  # radians; junction turns below this are considered smooth
_SCAN_SAMPLES = 4096


def _junction_corners(contour: ol.Contour, table: ol.ArcLengthTable):
    """Corner candidates at segment joins: exact arc position + turn angle."""
    segs = contour.segments
    out = []
    for i in range(len(segs)):
        prev = segs[i - 1]
        try:
            t_in = ol.bezier_tangent(prev, 1.0)
            t_out = ol.bezier_tangent(segs[i], 0.0)
        except ol.DegenerateSegmentError:
            continue
        dot = max(-1.0, min(1.0, t_in[0] * t_out[0] + t_in[1] * t_out[1]))
        angle = math.acos(dot)
        if angle > _CORNER_ANGLE:
            out.append((table.arc_of(i, 0.0), angle))
    return out


def _smooth_curvature_features(contour: ol.Contour, table: ol.ArcLengthTable):
    """High-curvature regions away from junctions, e.g. rounded corners.

    The contour is scanned on a uniform arc grid; contiguous runs where the
    curvature clearly exceeds the contour's typical level are summarized by
    their turning-mass centroid.  Using centroids (not argmax) keeps the
    result stable under similarity transforms even on constant-curvature arcs.
    """
    total = table.total_length
    n = _SCAN_SAMPLES
    ds = total / n
    s_grid = np.arange(n) * ds
    kappa = table.curvatures_many(s_grid)
    med = float(np.median(kappa))
    thresh = max(2.0 * med, 1e-3)
    above = kappa > thresh
    if not above.any() or above.all():
        return []
    # Rotate so the scan starts off-region, making runs non-wrapping.
    start = int(np.argmin(above))
    above = np.roll(above, -start)
    kap = np.roll(kappa, -start)
    feats = []
    j = 0
    while j < n:
        if not above[j]:
            j += 1
            continue
        k = j
        while k < n and above[k]:
            k += 1
        weights = kap[j:k]
        # Centroid of turning mass; indices are relative to the rotated grid.
        centroid = float(np.sum(weights * np.arange(j, k)) / np.sum(weights))
        s_pos = ((centroid + start) % n + 0.5) * ds
        mass = float(np.sum(weights) * ds)  # total turn over the region
        feats.append((s_pos % total, mass))
        j = k
    return feats


def _topmost_point(table: ol.ArcLengthTable, n: int = 2048) -> tuple[float, float]:
    total = table.total_length
    pts = table.points_many(np.arange(n) * total / n)
    order = np.lexsort((pts[:, 0], -pts[:, 1]))  # highest y, then lowest x
    return tuple(pts[order[0]])


def _cyclic_gap(a: float, b: float, total: float) -> float:
    """Arc distance from a forward to b."""
    return (b - a) % total


def _min_cyclic_dist(a: float, b: float, total: float) -> float:
    d = abs(a - b) % total
    return min(d, total - d)


def _segment_contour(contour: ol.Contour, n1: int) -> list[tuple[int, float]]:
    table = ol.ArcLengthTable(contour)
    total = table.total_length
    if total < 1e-9:
        raise ol.DegenerateSegmentError("contour too short to segment")
    min_sep = total / (2.0 * n1)

    candidates = _junction_corners(contour, table) + _smooth_curvature_features(
        contour, table
    )
    # Strongest turning features first; ties resolved by traversal order.
    candidates.sort(key=lambda c: (-c[1], c[0]))
    chosen: list[float] = []
    for s, _ in candidates:
        if len(chosen) >= n1:
            break
        if all(_min_cyclic_dist(s, c, total) >= min_sep for c in chosen):
            chosen.append(s)

    if not chosen:
        # Featureless loop (e.g. a circle): uniform placement from the top.
        top = _topmost_point(table, 2048)
        s_top = _nearest_arc_position(table, top)
        chosen = [(s_top + i * total / n1) % total for i in range(n1)]
    elif len(chosen) < n1:
        chosen = _fill_uniform(sorted(chosen), n1 - len(chosen), total)

    chosen.sort()
    # Anchor: rotate so the first node is nearest the topmost point.
    top = _topmost_point(table)
    dists = [math.dist(table.point_at(s), top) for s in chosen]
    first = int(np.argmin(dists))
    ordered = chosen[first:] + chosen[:first]
    return [table.locate(s) for s in ordered]


def _nearest_arc_position(table: ol.ArcLengthTable, target: tuple[float, float], n: int = 2048) -> float:
    total = table.total_length
    grid = np.arange(n) * total / n
    pts = table.points_many(grid)
    d = np.linalg.norm(pts - np.asarray(target), axis=1)
    return float(grid[int(np.argmin(d))])


def _fill_uniform(anchors: list[float], extras: int, total: float) -> list[float]:
    """Distribute extra nodes into the arc gaps between anchors.

    Gaps receive extras proportionally to their length (largest-remainder
    rounding), placed at even fractions inside each gap.
    """
    gaps = []
    for i, a in enumerate(anchors):
        b = anchors[(i + 1) % len(anchors)]
        gaps.append((a, _cyclic_gap(a, b, total) if len(anchors) > 1 else total))
    quotas = [extras * g / total for _, g in gaps]
    counts = [int(math.floor(q)) for q in quotas]
    short = extras - sum(counts)
    remainders = sorted(
        range(len(gaps)), key=lambda i: (-(quotas[i] - counts[i]), i)
    )
    for i in remainders[:short]:
        counts[i] += 1
    out = list(anchors)
    for (a, g), cnt in zip(gaps, counts):
        for i in range(cnt):
            out.append((a + g * (i + 1) / (cnt + 1)) % total)
    return sorted(out)


def segment_strokes(
    outline: ol.GlyphOutline, template: GraphTemplate
) -> StrokeSegmentation:
    """Place each contour's primary nodes on the outline.

    Nodes go to the strongest turning features (corners and tight arcs) at
    least total/(2*n1) apart; any remaining budget is filled uniformly in the
    gaps.  The first node of each contour is the one nearest its topmost
    point, which keeps node correspondence stable across font styles.
    """
    canon = canonicalize_outline(outline)
    if len(canon.contours) != len(template.contours):
        raise ContourMismatchError(
            f"glyph {glyph_letter(template.glyph_id)}: outline has "
            f"{len(canon.contours)} contours, template expects {len(template.contours)}"
        )
    params = []
    for contour, (n1, _) in zip(canon.contours, template.contours):
        params.append(tuple(_segment_contour(contour, n1)))
    return StrokeSegmentation(primary_params=tuple(params))


def align_nodes(
    outline: ol.GlyphOutline,
    seg: StrokeSegmentation,
    template: GraphTemplate,
) -> GlyphGraph:
    """Ground-truth node attributes: uniform samples along each stroke.

    Each stroke contributes n2 samples spaced evenly in arc length from its
    primary node (inclusive) to the next primary node (exclusive), each
    carrying position and unit tangent.  Node order follows the traversal.
    """
    canon = canonicalize_outline(outline)
    if len(canon.contours) != len(template.contours):
        raise ContourMismatchError("outline/template contour count mismatch")
    rows: list[np.ndarray] = []
    for contour, (n1, n2), prm in zip(
        canon.contours, template.contours, seg.primary_params
    ):
        if len(prm) != n1:
            raise GraphValidationError(
                f"segmentation has {len(prm)} primaries, template wants {n1}"
            )
        table = ol.ArcLengthTable(contour)
        total = table.total_length
        s_primary = [table.arc_of(i, t) for i, t in prm]
        s_all: list[float] = []
        for i, s0 in enumerate(s_primary):
            s1 = s_primary[(i + 1) % n1]
            gap = _cyclic_gap(s0, s1, total)
            if n1 == 1:
                gap = total
            if gap < 1e-9:
                raise GraphValidationError(
                    f"zero-length stroke at contour arc {s0:.6f}"
                )
            s_all.extend((s0 + gap * j / n2) % total for j in range(n2))
        s_arr = np.array(s_all)
        pts = table.points_many(s_arr)
        tans = table.tangents_many(s_arr)
        rows.append(np.concatenate([pts, tans], axis=1))
    nodes = np.concatenate(rows, axis=0).astype(np.float64)
    return GlyphGraph(template=template, nodes=nodes)


def build_graph(outline: ol.GlyphOutline, glyph_id: int | None = None) -> GlyphGraph:
    """Convenience: template lookup + segmentation + alignment in one call."""
    gid = outline.glyph_id if glyph_id is None else glyph_id
    template = build_template(gid)
    seg = segment_strokes(outline, template)
    return align_nodes(outline, seg, template)


# ---------------------------------------------------------------------------
# Validation and editing


def validate_graph(g: GlyphGraph) -> list[str]:
    """Empty list iff all structural invariants hold; one message per fault."""
    v: list[str] = []
    t = g.template
    if t.node_count != TOTAL_NODES:
        v.append(f"node budget {t.node_count} ≠ {TOTAL_NODES}")
    n1 = t.n1_total
    adj = np.asarray(t.adjacency)
    if adj.shape != (n1, n1):
        v.append(f"adjacency shape {adj.shape} ≠ ({n1}, {n1})")
        return v
    if not np.isin(adj, (0, 1)).all():
        v.append("adjacency entries must be 0/1")
    ranges = t.contour_stroke_ranges()
    for ci, (a, b) in enumerate(ranges):
        block = adj[a:b, a:b]
        if not (block.sum(axis=0) == 1).all() or not (block.sum(axis=1) == 1).all():
            v.append(f"contour {ci}: strokes do not form a directed cycle")
        elif not _is_single_cycle(block):
            v.append(f"contour {ci}: adjacency splits into multiple cycles")
        outside = adj[a:b].sum() - block.sum() + adj[:, a:b].sum() - block.sum()
        if outside != 0:
            v.append(f"contour {ci}: cross-contour edges present")
    if g.nodes.shape != (t.node_count, 4):
        v.append(f"node matrix shape {g.nodes.shape}")
        return v
    if not np.isfinite(g.nodes).all():
        v.append("non-finite node attributes")
        return v
    norms = np.linalg.norm(g.nodes[:, 2:4], axis=1)
    for i in np.nonzero(np.abs(norms - 1.0) > 1e-6)[0]:
        v.append(f"node {i}: tangent norm {norms[i]:.6g}")
    xy = g.nodes[:, :2]
    for i in np.nonzero(((xy < -0.1) | (xy > 1.1)).any(axis=1))[0]:
        v.append(f"node {i}: position {tuple(xy[i])} outside [-0.1, 1.1]^2")
    if g.mapping is not None:
        m = g.mapping
        if m.ndim != 2 or m.shape[1] != t.node_count:
            v.append(f"mapping shape {m.shape}")
        else:
            if not np.isin(m, (0, 1)).all():
                v.append("mapping entries must be 0/1")
            bad = np.nonzero(m.sum(axis=0) != 1)[0]
            for j in bad:
                v.append(f"mapping column {j} sums to {m[:, j].sum()}")
    return v


def _is_single_cycle(block: np.ndarray) -> bool:
    n = block.shape[0]
    nxt = block.argmax(axis=1)
    seen, at = set(), 0
    for _ in range(n):
        if at in seen:
            return False
        seen.add(at)
        at = int(nxt[at])
    return len(seen) == n and at == 0


def apply_edit(
    g: GlyphGraph, edits: list[tuple[int, float, float, float, float]]
) -> GlyphGraph:
    """Replace node rows with absolute values; tangents are re-normalized."""
    nodes = g.nodes.copy()
    n = nodes.shape[0]
    for idx, x, y, tx, ty in edits:
        if not 0 <= idx < n:
            raise IndexError(f"node index {idx} out of range [0, {n})")
        norm = math.hypot(tx, ty)
        if norm < 1e-12:
            raise ValueError(f"node {idx}: replacement tangent is zero")
        nodes[idx] = (x, y, tx / norm, ty / norm)
    out = GlyphGraph(template=g.template, nodes=nodes, mapping=g.mapping)
    problems = validate_graph(out)
    if problems:
        raise GraphValidationError("; ".join(problems))
    return out


# ---------------------------------------------------------------------------
# Wire format


def graph_to_dict(g: GlyphGraph) -> dict:
    return {
        "glyph_id": g.template.glyph_id,
        "contours": [list(c) for c in g.template.contours],
        "adjacency": np.asarray(g.template.adjacency).astype(int).ravel().tolist(),
        "nodes": np.asarray(g.nodes, dtype=np.float64).ravel().tolist(),
    }


def graph_to_json(g: GlyphGraph) -> str:
    return json.dumps(graph_to_dict(g))


def graph_from_dict(obj: dict) -> GlyphGraph:
    template = build_template(int(obj["glyph_id"]))
    declared = tuple(tuple(c) for c in obj["contours"])
    if declared != template.contours:
        raise GraphValidationError(
            f"contours {declared} do not match glyph "
            f"{glyph_letter(template.glyph_id)} template {template.contours}"
        )
    n1 = template.n1_total
    adj = np.array(obj["adjacency"], dtype=np.uint8).reshape(n1, n1)
    if not np.array_equal(adj, template.adjacency):
        raise GraphValidationError("adjacency does not match glyph template")
    nodes = np.array(obj["nodes"], dtype=np.float64).reshape(template.node_count, 4)
    return GlyphGraph(template=template, nodes=nodes)


def graph_from_json(text: str) -> GlyphGraph:
    return graph_from_dict(json.loads(text))
