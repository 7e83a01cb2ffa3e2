"""Dataset ingestion: build all four glyph modalities and persist them.

Input layout: ``source/<font_name>/<LETTER>.svg`` where each file holds the
glyph's SVG path data (either the raw ``d`` string or a minimal SVG document;
only the first ``d="..."`` attribute of the latter is read).  An optional
``font.json`` per font dir carries ``units_per_em`` (default 1.0).

Output layout: ``out/<font_id>/<LETTER>.png`` plus ``.graph.json`` and
``.outline.json``, with a JSON-Lines manifest (one font per line) tying it
together.  Glyphs whose contour count does not match their template are
excluded with a reason rather than repaired.
"""

from __future__ import annotations

import dataclasses
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import glyphgraph as gg
from . import outline as ol
from . import raster
from .synth import SynthFontParams, generate_synth_font, random_font_params

LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
IMAGE_SIZE = 128

TRAINVAL = "trainval"
TEST = "test"


@dataclass
class GlyphEntry:
    glyph_id: int
    letter: str
    outline_path: str | None = None
    image_path: str | None = None
    graph_path: str | None = None
    excluded: bool = False
    reason: str | None = None


@dataclass
class FontEntry:
    font_id: int
    name: str
    split: str | None = None
    glyphs: list[GlyphEntry] = field(default_factory=list)


@dataclass
class DatasetManifest:
    fonts: list[FontEntry] = field(default_factory=list)

    def write(self, path: Path | str) -> None:
        path = Path(path)
        with path.open("w") as fh:
            for font in self.fonts:
                fh.write(json.dumps(dataclasses.asdict(font)) + "\n")

    @staticmethod
    def read(path: Path | str) -> "DatasetManifest":
        fonts = []
        with Path(path).open() as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                glyphs = [GlyphEntry(**g) for g in obj.pop("glyphs")]
                fonts.append(FontEntry(glyphs=glyphs, **obj))
        return DatasetManifest(fonts=fonts)


_D_ATTR = re.compile(r'\bd="([^"]+)"')


def _read_path_data(path: Path) -> str:
    text = path.read_text().strip()
    if text.startswith("<"):
        m = _D_ATTR.search(text)
        if not m:
            raise ValueError("no d attribute found in SVG document")
        return m.group(1)
    return text


def _ingest_glyph(
    font_dir: Path, letter: str, units_per_em: float, out_font_dir: Path
) -> GlyphEntry:
    gid = gg.glyph_id_of(letter)
    entry = GlyphEntry(glyph_id=gid, letter=letter)
    src = font_dir / f"{letter}.svg"
    try:
        data = _read_path_data(src)
        outl = ol.normalize_outline(ol.parse_path(data, units_per_em, glyph_id=gid))
    except Exception as e:  # unreadable or unparsable: excluded, not fatal
        entry.excluded = True
        entry.reason = f"parse error: {e}"
        return entry

    template = gg.build_template(gid)
    try:
        seg = gg.segment_strokes(outl, template)
        graph = gg.align_nodes(outl, seg, template)
    except gg.ContourMismatchError:
        entry.excluded = True
        entry.reason = "contour mismatch"
        return entry
    except Exception as e:
        entry.excluded = True
        entry.reason = f"segmentation failed: {e}"
        return entry
    problems = gg.validate_graph(graph)
    if problems:
        entry.excluded = True
        entry.reason = "invalid graph: " + problems[0]
        return entry

    out_font_dir.mkdir(parents=True, exist_ok=True)
    image = raster.rasterize(outl, IMAGE_SIZE, IMAGE_SIZE)
    img_path = out_font_dir / f"{letter}.png"
    graph_path = out_font_dir / f"{letter}.graph.json"
    outline_path = out_font_dir / f"{letter}.outline.json"
    raster.save_png(image, img_path)
    graph_path.write_text(gg.graph_to_json(graph))
    outline_path.write_text(ol.outline_to_json(outl))
    entry.image_path = str(img_path)
    entry.graph_path = str(graph_path)
    entry.outline_path = str(outline_path)
    return entry


def ingest(source_dir: Path | str, out_dir: Path | str, workers: int = 1) -> DatasetManifest:
    """Build images, graphs and outlines for every glyph under source_dir."""
    source_dir = Path(source_dir)
    out_dir = Path(out_dir)
    font_dirs = sorted(p for p in source_dir.iterdir() if p.is_dir())
    if not font_dirs:
        raise FileNotFoundError(f"no font directories under {source_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = DatasetManifest()
    for font_id, font_dir in enumerate(font_dirs):
        meta = font_dir / "font.json"
        units = 1.0
        if meta.exists():
            units = float(json.loads(meta.read_text()).get("units_per_em", 1.0))
        out_font_dir = out_dir / f"{font_id:04d}_{font_dir.name}"
        letters = [l for l in LETTERS if (font_dir / f"{l}.svg").exists()]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                entries = list(
                    ex.map(
                        lambda l: _ingest_glyph(font_dir, l, units, out_font_dir),
                        letters,
                    )
                )
        else:
            entries = [_ingest_glyph(font_dir, l, units, out_font_dir) for l in letters]
        entries.sort(key=lambda e: e.glyph_id)  # deterministic merge
        manifest.fonts.append(
            FontEntry(font_id=font_id, name=font_dir.name, glyphs=entries)
        )
    manifest.write(out_dir / "manifest.jsonl")
    return manifest


def split(
    manifest: DatasetManifest, seed: int, test_fraction: float = 0.05
) -> DatasetManifest:
    """Font-level train/test split (never glyph-level), seeded shuffle."""
    n = len(manifest.fonts)
    if n < 2:
        raise ValueError("need at least 2 fonts to split")
    n_test = max(1, round(test_fraction * n))
    order = np.random.default_rng(seed).permutation(n)
    test_ids = set(order[:n_test].tolist())
    fonts = []
    for i, font in enumerate(manifest.fonts):
        fonts.append(dataclasses.replace(font, split=TEST if i in test_ids else TRAINVAL))
    return DatasetManifest(fonts=fonts)


def stats(manifest: DatasetManifest) -> dict:
    """Counts per glyph, exclusion histogram and split sizes."""
    per_glyph = {letter: 0 for letter in LETTERS}
    exclusions: dict[str, int] = {}
    split_sizes = {TRAINVAL: 0, TEST: 0, "unsplit": 0}
    valid = 0
    total = 0
    for font in manifest.fonts:
        split_sizes[font.split or "unsplit"] += 1
        for glyph in font.glyphs:
            total += 1
            if glyph.excluded:
                key = (glyph.reason or "unknown").split(":")[0]
                exclusions[key] = exclusions.get(key, 0) + 1
            else:
                per_glyph[glyph.letter] += 1
                valid += 1
    return {
        "fonts": len(manifest.fonts),
        "glyphs_total": total,
        "glyphs_valid": valid,
        "per_glyph": per_glyph,
        "exclusions": exclusions,
        "split_sizes": split_sizes,
    }


def format_stats(report: dict) -> str:
    lines = [
        f"fonts: {report['fonts']}   glyphs: {report['glyphs_valid']}/{report['glyphs_total']} valid",
        f"splits: {report['split_sizes']}",
        "glyph  count",
    ]
    for letter in LETTERS:
        lines.append(f"  {letter}    {report['per_glyph'][letter]}")
    if report["exclusions"]:
        lines.append("exclusions:")
        for reason, count in sorted(report["exclusions"].items()):
            lines.append(f"  {reason}: {count}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Synthetic corpora


def write_synth_corpus(
    source_dir: Path | str,
    n_fonts: int,
    seed: int = 0,
    glyphs: str = LETTERS,
) -> list[SynthFontParams]:
    """Write a random synthetic font corpus in the ingestion source layout."""
    source_dir = Path(source_dir)
    rng = np.random.default_rng(seed)
    all_params = []
    for i in range(n_fonts):
        params = random_font_params(rng)
        font_dir = source_dir / f"synth{i:03d}"
        font_dir.mkdir(parents=True, exist_ok=True)
        font = generate_synth_font(params, glyphs)
        for letter, d in font.items():
            (font_dir / f"{letter}.svg").write_text(d)
        (font_dir / "font.json").write_text(
            json.dumps({"units_per_em": 1.0, "params": dataclasses.asdict(params)})
        )
        all_params.append(params)
    return all_params


# ---------------------------------------------------------------------------
# Training views


@dataclass
class DatasetBundle:
    """In-memory arrays for training: one row per valid glyph."""

    images: np.ndarray  # (N, H, W) float32
    nodes: np.ndarray  # (N, 150, 4) float32
    font_index: np.ndarray  # (N,) int64, contiguous per split
    glyph_ids: np.ndarray  # (N,) int64
    font_names: list[str]

    @property
    def n_fonts(self) -> int:
        return len(self.font_names)

    def rows_for_glyph(self, glyph_id: int) -> np.ndarray:
        return np.nonzero(self.glyph_ids == glyph_id)[0]


def load_bundle(manifest: DatasetManifest, split_name: str | None = None) -> DatasetBundle:
    images, nodes, font_idx, glyph_ids, names = [], [], [], [], []
    next_font = 0
    for font in manifest.fonts:
        if split_name is not None and font.split != split_name:
            continue
        rows = [g for g in font.glyphs if not g.excluded]
        if not rows:
            continue
        names.append(font.name)
        for glyph in rows:
            images.append(raster.load_png(glyph.image_path).pixels.astype(np.float32))
            graph = gg.graph_from_json(Path(glyph.graph_path).read_text())
            nodes.append(graph.nodes.astype(np.float32))
            font_idx.append(next_font)
            glyph_ids.append(glyph.glyph_id)
        next_font += 1
    if not images:
        raise ValueError("no glyphs matched the requested split")
    return DatasetBundle(
        images=np.stack(images),
        nodes=np.stack(nodes),
        font_index=np.array(font_idx, dtype=np.int64),
        glyph_ids=np.array(glyph_ids, dtype=np.int64),
        font_names=names,
    )
