"""User-facing pipelines: font completion, manipulation and interpolation.

A Pipeline wraps a trained checkpoint.  Completion encodes a reference glyph
image into a style vector, decodes per-glyph point sets, assembles graphs and
renders them either conventionally (Hermite vectorization + scanline fill) or
with the trained neural renderer.  Manipulation propagates a graph edit to the
whole glyph set, either by re-encoding a re-rendered image or by optimizing
the style vector directly against the edited node attributes.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import glyphgraph as gg
from . import raster
from . import tensor as T
from .glyphgraph import GlyphGraph, build_template
from .neural import FontModel, ModelConfig
from .raster import RasterImage

DEFAULT_LAMBDAS = (0.8, 0.6, 0.4, 0.2)
BACKWARD_STEPS = 10_000
BACKWARD_LR = 1e-4


@dataclass
class GlyphResult:
    glyph_id: int
    graph: GlyphGraph
    image: RasterImage  # per the renderer chosen for the run
    image_neural: RasterImage | None = None
    metrics: dict | None = None


@dataclass
class CompletionResult:
    style: np.ndarray  # the z that produced the set
    entries: dict[int, GlyphResult] = field(default_factory=dict)

    def glyphs(self) -> list[int]:
        return sorted(self.entries)


class UntrainedRendererError(KeyError):
    pass


class Pipeline:
    """Inference wrapper around a checkpoint; one lock per instance since the
    tape cache inside the parameter store is not reentrant."""

    def __init__(self, model: FontModel):
        self.model = model
        self._lock = threading.Lock()

    @staticmethod
    def load(checkpoint: Path | str) -> "Pipeline":
        store, config = T.load_checkpoint(checkpoint)
        model = FontModel(ModelConfig.from_dict(config["model"]), store)
        return Pipeline(model)

    # ------------------------------------------------------------------
    # Style encoding

    def encode_image(self, image: RasterImage) -> np.ndarray:
        with self._lock:
            self.model.store.begin_step()
            z = self.model.encode(image.pixels[None, :, :], training=False)
        return z.data[0].copy()

    def encode_mean(self, images: list[RasterImage]) -> np.ndarray:
        if not images:
            raise ValueError("need at least one input image")
        zs = [self.encode_image(img) for img in images]
        return np.mean(zs, axis=0)

    # ------------------------------------------------------------------
    # Graph prediction

    def predict(self, z: np.ndarray, c: int) -> tuple[GlyphGraph, np.ndarray, np.ndarray]:
        """Style vector -> (materialized graph, mapping (m,n), raw points (m,4))."""
        with self._lock:
            self.model.store.begin_step()
            zt = T.Tensor(z[None].astype(self.model.store.dtype))
            points = self.model.decode_points(zt, c, training=False)
            mapping, _, nodes = self.model.construct_graph(points, c, training=False)
        graph = materialize_graph(c, nodes.data[0])
        return graph, mapping.data[0].copy(), points.data[0].copy()

    def render_neural(self, graph: GlyphGraph) -> RasterImage:
        c = graph.template.glyph_id
        if not self.model.has_renderer(c):
            raise UntrainedRendererError(f"no trained renderer for glyph {c}")
        with self._lock:
            self.model.store.begin_step()
            nodes = T.Tensor(graph.nodes[None].astype(self.model.store.dtype))
            img = self.model.render_nodes(nodes, c, training=False)
        return RasterImage.from_array(np.clip(img.data[0].astype(np.float64), 0.0, 1.0))

    # ------------------------------------------------------------------
    # Completion

    def complete(
        self,
        image: RasterImage,
        c_in: int,
        targets: list[int],
        renderer: str = "conventional",
        ground_truth: dict[int, RasterImage] | None = None,
    ) -> CompletionResult:
        z = self.encode_image(image)
        return self.complete_from_style(z, targets, renderer, ground_truth)

    def complete_multi(
        self,
        images: list[RasterImage],
        glyph_ids: list[int],
        targets: list[int],
        renderer: str = "conventional",
        ground_truth: dict[int, RasterImage] | None = None,
    ) -> CompletionResult:
        if len(images) != len(glyph_ids):
            raise ValueError("one glyph id per input image")
        z = self.encode_mean(images)
        return self.complete_from_style(z, targets, renderer, ground_truth)

    def complete_from_style(
        self,
        z: np.ndarray,
        targets: list[int],
        renderer: str = "conventional",
        ground_truth: dict[int, RasterImage] | None = None,
    ) -> CompletionResult:
        if renderer not in ("conventional", "neural"):
            raise ValueError(f"unknown renderer {renderer!r}")
        result = CompletionResult(style=z.copy())
        size = self.model.config.image_size
        for c in targets:
            graph, _, _ = self.predict(z, c)
            conventional = raster.rasterize(raster.graph_to_outline(graph), size, size)
            neural = None
            if renderer == "neural":
                neural = self.render_neural(graph)
            chosen = neural if renderer == "neural" else conventional
            metrics = None
            if ground_truth is not None and c in ground_truth:
                metrics = raster.metrics_report(chosen, ground_truth[c])
            result.entries[c] = GlyphResult(
                glyph_id=c,
                graph=graph,
                image=chosen,
                image_neural=neural,
                metrics=metrics,
            )
        return result

    # ------------------------------------------------------------------
    # Manipulation

    def manipulate_forward(
        self,
        edited: GlyphGraph,
        targets: list[int],
        renderer: str = "conventional",
        ground_truth: dict[int, RasterImage] | None = None,
    ) -> tuple[RasterImage, CompletionResult]:
        """Re-render the edited graph with the neural renderer, re-encode, complete."""
        c_in = edited.template.glyph_id
        rendered = self.render_neural(edited)  # raises if the renderer is untrained
        result = self.complete(rendered, c_in, targets, renderer, ground_truth)
        return rendered, result

    def manipulate_backward(
        self,
        edited_nodes: np.ndarray,
        mapping: np.ndarray,
        z_init: np.ndarray,
        c_in: int,
        targets: list[int],
        steps: int = BACKWARD_STEPS,
        lr: float = BACKWARD_LR,
        renderer: str = "conventional",
        record_every: int = 100,
        progress=None,
    ) -> tuple[np.ndarray, list[tuple[int, float]], CompletionResult]:
        """Optimize the style vector so the decoded points match the edit.

        Adam descends on z only (all network parameters stay frozen); the
        node mapping is pinned to the one from the original inference.  The
        best iterate seen is tracked and returned, so the recorded objective
        trace is non-increasing.
        """
        if edited_nodes.shape != (self.model.config.n_nodes, 4):
            raise ValueError(f"edited nodes shape {edited_nodes.shape}")
        mapping = np.asarray(mapping, dtype=self.model.store.dtype)
        if mapping.shape != (self.model.config.m_points, self.model.config.n_nodes):
            raise ValueError(f"mapping shape {mapping.shape}")

        zstore = T.ParamStore(dtype=self.model.store.dtype)
        zstore.add("z", z_init[None].astype(self.model.store.dtype))
        target = edited_nodes[None].astype(self.model.store.dtype)
        map_const = mapping[None]
        records: list[tuple[int, float]] = []
        best_obj = np.inf
        best_z = z_init.copy()

        map_t = np.ascontiguousarray(map_const.transpose(0, 2, 1))
        with self._lock:
            self._freeze_model()
            try:
                for step in range(steps + 1):
                    zstore.begin_step()
                    self.model.store.begin_step()
                    zt = zstore.leaf("z")
                    points = self.model.decode_points(zt, c_in, training=False)
                    mapped = T.matmul(T.constant(map_t), points)
                    diff = mapped - T.constant(target)
                    obj = T.sqrt(T.reduce_sum(diff * diff))
                    value = float(obj.data)
                    if not np.isfinite(value):
                        raise FloatingPointError(
                            f"objective diverged at step {step}: {value} "
                            f"(|z| = {float(np.linalg.norm(zstore.value('z'))):.3g})"
                        )
                    if value < best_obj:
                        best_obj = value
                        best_z = zstore.value("z")[0].copy()
                    if step % record_every == 0:
                        records.append((step, best_obj))
                        if progress is not None:
                            progress(step, best_obj)
                    if step == steps:
                        break
                    T.backward(obj)
                    zstore.collect_grads()
                    T.adam_step(zstore, lr=lr)
            finally:
                self._thaw_model()

        completion = self.complete_from_style(best_z, targets, renderer)
        return best_z, records, completion

    def _freeze_model(self):
        for p in self.model.store.params.values():
            p.trainable = False

    def _thaw_model(self):
        for p in self.model.store.params.values():
            p.trainable = True

    # ------------------------------------------------------------------
    # Interpolation

    def interpolate(
        self,
        image1: RasterImage,
        image2: RasterImage,
        targets: list[int],
        lambdas: tuple[float, ...] = DEFAULT_LAMBDAS,
        renderer: str = "conventional",
    ) -> list[tuple[float, CompletionResult]]:
        """Blend two styles: z(lam) = lam * z1 + (1 - lam) * z2."""
        if any(not 0.0 <= l <= 1.0 for l in lambdas):
            raise ValueError("lambda values must lie in [0, 1]")
        z1 = self.encode_image(image1)
        z2 = self.encode_image(image2)
        out = []
        for lam in lambdas:
            z = mix_styles(z1, z2, lam)
            out.append((lam, self.complete_from_style(z, targets, renderer)))
        return out


def mix_styles(z1: np.ndarray, z2: np.ndarray, lam: float) -> np.ndarray:
    return lam * z1 + (1.0 - lam) * z2


# ---------------------------------------------------------------------------
# Prediction materialization


def materialize_graph(c: int, raw_nodes: np.ndarray) -> GlyphGraph:
    """Turn raw predicted node attributes into a valid GlyphGraph.

    Predicted tangents are convex mixtures, so they are re-normalized (with a
    chord-direction fallback when a mixture cancels to zero); coordinates are
    clamped to the legal window and exactly coincident consecutive nodes are
    nudged apart so the Hermite vectorizer always has a usable chord.
    """
    template = build_template(c)
    nodes = np.array(raw_nodes, dtype=np.float64)
    if nodes.shape != (template.node_count, 4):
        raise ValueError(f"node matrix shape {nodes.shape}")
    nodes[:, 0:2] = np.clip(nodes[:, 0:2], -0.0999, 1.0999)
    n = len(nodes)
    chord = np.roll(nodes[:, :2], -1, axis=0) - nodes[:, :2]
    for i in range(n):
        norm = float(np.hypot(nodes[i, 2], nodes[i, 3]))
        if norm < 1e-9:
            cn = float(np.hypot(chord[i, 0], chord[i, 1]))
            if cn < 1e-12:
                nodes[i, 2:4] = (1.0, 0.0)
            else:
                nodes[i, 2:4] = chord[i] / cn
        else:
            nodes[i, 2:4] /= norm
    # Separate coincident consecutive nodes within each contour loop.
    for lo, hi in template.contour_node_ranges():
        for i in range(lo, hi):
            j = lo + (i + 1 - lo) % (hi - lo)
            if np.hypot(*(nodes[j, :2] - nodes[i, :2])) < 1e-9:
                nodes[j, 0] += 2e-6 * (1 + (j - lo) % 3)
                nodes[j, 1] += 2e-6
    return GlyphGraph(template=template, nodes=nodes)


# ---------------------------------------------------------------------------
# Result export


def export_completion(result: CompletionResult, out_dir: Path | str) -> None:
    """Directory of per-glyph PNGs, graph JSON files and a metrics summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_metrics = {}
    for c, entry in result.entries.items():
        letter = gg.glyph_letter(c)
        raster.save_png(entry.image, out_dir / f"{letter}.png")
        if entry.image_neural is not None:
            raster.save_png(entry.image_neural, out_dir / f"{letter}.neural.png")
        (out_dir / f"{letter}.graph.json").write_text(gg.graph_to_json(entry.graph))
        if entry.metrics is not None:
            all_metrics[letter] = entry.metrics
    summary = {"glyphs": all_metrics}
    if all_metrics:
        summary["mean"] = {
            k: float(np.mean([m[k] for m in all_metrics.values()]))
            for k in ("mse", "psnr", "ssim")
        }
    (out_dir / "metrics.json").write_text(json.dumps(summary, indent=1))


# ---------------------------------------------------------------------------
# Evaluation over a dataset split


def evaluate_completion(
    pipeline: Pipeline,
    bundle,
    inputs_per_font: int = 3,
    seed: int = 0,
) -> dict:
    """Test-split completion metrics for the graph method (conventional render)."""
    rng = np.random.default_rng(seed)
    scores = []
    for font in range(bundle.n_fonts):
        rows = np.nonzero(bundle.font_index == font)[0]
        if len(rows) < 2:
            continue
        chosen = rng.choice(rows, size=min(inputs_per_font, len(rows)), replace=False)
        for r_in in chosen:
            image = RasterImage.from_array(bundle.images[r_in].astype(np.float64))
            z = pipeline.encode_image(image)
            for r_t in rows:
                if r_t == r_in:
                    continue
                c = int(bundle.glyph_ids[r_t])
                graph, _, _ = pipeline.predict(z, c)
                pred = raster.rasterize(
                    raster.graph_to_outline(graph),
                    pipeline.model.config.image_size,
                    pipeline.model.config.image_size,
                )
                truth = RasterImage.from_array(bundle.images[r_t].astype(np.float64))
                scores.append(raster.metrics_report(pred, truth))
    return _mean_scores(scores)


def evaluate_baseline(
    pipeline: Pipeline,
    bundle,
    inputs_per_font: int = 3,
    seed: int = 0,
) -> dict:
    """Same protocol for the image-to-image baseline."""
    rng = np.random.default_rng(seed)
    model = pipeline.model
    scores = []
    for font in range(bundle.n_fonts):
        rows = np.nonzero(bundle.font_index == font)[0]
        if len(rows) < 2:
            continue
        chosen = rng.choice(rows, size=min(inputs_per_font, len(rows)), replace=False)
        for r_in in chosen:
            for r_t in rows:
                if r_t == r_in:
                    continue
                c = int(bundle.glyph_ids[r_t])
                with pipeline._lock:
                    model.store.begin_step()
                    pred = model.baseline_img2img(
                        bundle.images[r_in][None], c, training=False
                    )
                img = RasterImage.from_array(
                    np.clip(pred.data[0].astype(np.float64), 0, 1)
                )
                truth = RasterImage.from_array(bundle.images[r_t].astype(np.float64))
                scores.append(raster.metrics_report(img, truth))
    return _mean_scores(scores)


def _mean_scores(scores: list[dict]) -> dict:
    if not scores:
        return {"mse": float("nan"), "psnr": float("nan"), "ssim": float("nan"), "count": 0}
    out = {k: float(np.mean([s[k] for s in scores])) for k in ("mse", "psnr", "ssim")}
    out["count"] = len(scores)
    return out
