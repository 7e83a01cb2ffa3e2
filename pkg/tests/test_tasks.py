import numpy as np
import pytest

from fontgraph import glyphgraph as gg
from fontgraph import raster
from fontgraph import tasks
from fontgraph import tensor as T
from fontgraph.neural import FontModel, ModelConfig
from fontgraph.raster import RasterImage


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Random-init checkpoint: task contracts must hold without training."""
    model = FontModel.create(ModelConfig(s_fonts=2), seed=3)
    model.ensure_renderer(gg.glyph_id_of("H"))
    path = tmp_path_factory.mktemp("ckpt") / "random"
    T.save_checkpoint(model.store, path, config={"model": model.config.to_dict()})
    return tasks.Pipeline.load(path)


@pytest.fixture(scope="module")
def ref_image():
    rng = np.random.default_rng(0)
    return RasterImage.from_array(rng.uniform(0, 1, (128, 128)))


H = gg.glyph_id_of("H")
I = gg.glyph_id_of("I")
X = gg.glyph_id_of("X")


class TestComplete:
    def test_empty_targets(self, pipeline, ref_image):
        result = pipeline.complete(ref_image, H, [])
        assert result.entries == {}

    def test_covers_requested_set(self, pipeline, ref_image):
        result = pipeline.complete(ref_image, H, [I, X])
        assert result.glyphs() == sorted([I, X])
        for entry in result.entries.values():
            assert entry.image.width == 128
            assert gg.validate_graph(entry.graph) == []

    def test_deterministic(self, pipeline, ref_image):
        a = pipeline.complete(ref_image, H, [X])
        b = pipeline.complete(ref_image, H, [X])
        assert raster.png_bytes(a.entries[X].image) == raster.png_bytes(b.entries[X].image)
        assert np.array_equal(a.entries[X].graph.nodes, b.entries[X].graph.nodes)

    def test_metrics_attached_when_truth_given(self, pipeline, ref_image):
        truth = {X: RasterImage.from_array(np.zeros((128, 128)))}
        result = pipeline.complete(ref_image, H, [X], ground_truth=truth)
        m = result.entries[X].metrics
        assert set(m) == {"mse", "psnr", "ssim"}

    def test_reconstruction_not_worse_than_blank(self, pipeline, ref_image):
        # Sanity oracle: rendering *something* should beat an all-blank guess
        # at reproducing a glyph-shaped truth... at minimum be comparable.
        truth = {H: ref_image}
        result = pipeline.complete(ref_image, H, [H], ground_truth=truth)
        blank = RasterImage.from_array(np.zeros((128, 128)))
        assert result.entries[H].metrics["psnr"] >= raster.psnr(blank, ref_image) - 3.0

    def test_neural_renderer_requires_params(self, pipeline, ref_image):
        with pytest.raises(tasks.UntrainedRendererError):
            pipeline.complete(ref_image, H, [X], renderer="neural")

    def test_neural_renderer_when_trained(self, pipeline, ref_image):
        result = pipeline.complete(ref_image, H, [H], renderer="neural")
        assert result.entries[H].image_neural is not None


class TestCompleteMulti:
    def test_single_input_identical(self, pipeline, ref_image):
        a = pipeline.complete(ref_image, H, [X])
        b = pipeline.complete_multi([ref_image], [H], [X])
        assert np.array_equal(a.style, b.style)
        assert raster.png_bytes(a.entries[X].image) == raster.png_bytes(b.entries[X].image)

    def test_duplicated_input_identical(self, pipeline, ref_image):
        a = pipeline.complete_multi([ref_image], [H], [X])
        b = pipeline.complete_multi([ref_image, ref_image], [H, H], [X])
        assert np.allclose(a.style, b.style)

    def test_mean_of_two(self, pipeline, ref_image):
        other = RasterImage.from_array(
            np.random.default_rng(1).uniform(0, 1, (128, 128))
        )
        z1 = pipeline.encode_image(ref_image)
        z2 = pipeline.encode_image(other)
        combo = pipeline.complete_multi([ref_image, other], [H, I], [X])
        assert np.abs(combo.style - 0.5 * (z1 + z2)).max() < 1e-6

    def test_empty_inputs(self, pipeline):
        with pytest.raises(ValueError):
            pipeline.complete_multi([], [], [X])


class TestInterpolate:
    def test_default_grid(self, pipeline):
        assert tasks.DEFAULT_LAMBDAS == (0.8, 0.6, 0.4, 0.2)

    def test_endpoints_reproduce_single_input(self, pipeline, ref_image):
        other = RasterImage.from_array(
            np.random.default_rng(2).uniform(0, 1, (128, 128))
        )
        frames = pipeline.interpolate(ref_image, other, [X], lambdas=(1.0, 0.0))
        direct1 = pipeline.complete(ref_image, H, [X])
        direct2 = pipeline.complete(other, H, [X])
        assert raster.png_bytes(frames[0][1].entries[X].image) == raster.png_bytes(
            direct1.entries[X].image
        )
        assert raster.png_bytes(frames[1][1].entries[X].image) == raster.png_bytes(
            direct2.entries[X].image
        )

    def test_mixing_exactly_linear(self, pipeline, ref_image):
        rng = np.random.default_rng(3)
        z1 = rng.normal(size=128)
        z2 = rng.normal(size=128)
        base = tasks.mix_styles(z1, z2, 0.0)
        top = tasks.mix_styles(z1, z2, 1.0)
        for lam in (0.8, 0.6, 0.4, 0.2, 0.37):
            z = tasks.mix_styles(z1, z2, lam)
            assert np.abs((z - base) - lam * (top - base)).max() < 1e-6

    def test_lambda_out_of_range(self, pipeline, ref_image):
        with pytest.raises(ValueError):
            pipeline.interpolate(ref_image, ref_image, [X], lambdas=(1.2,))


class TestManipulateBackward:
    def test_descent_from_original_prediction(self, pipeline, ref_image):
        z = pipeline.encode_image(ref_image)
        graph, mapping, points = pipeline.predict(z, H)
        nodes_hat = mapping.T @ points
        z_new, records, _ = pipeline.manipulate_backward(
            nodes_hat, mapping, z, H, targets=[], steps=200, record_every=50
        )
        objs = [v for _, v in records]
        assert objs[-1] <= objs[0] + 1e-9

    def test_recorded_trace_non_increasing(self, pipeline, ref_image):
        rng = np.random.default_rng(4)
        z = pipeline.encode_image(ref_image)
        graph, mapping, points = pipeline.predict(z, H)
        edited = mapping.T @ points + rng.normal(0, 0.01, size=(150, 4)).astype(np.float32)
        _, records, _ = pipeline.manipulate_backward(
            edited, mapping, z, H, targets=[], steps=400, record_every=100
        )
        objs = [v for _, v in records]
        assert all(b <= a + 1e-6 for a, b in zip(objs, objs[1:]))

    def test_defaults_match_contract(self):
        assert tasks.BACKWARD_STEPS == 10_000
        assert tasks.BACKWARD_LR == 1e-4

    def test_bad_mapping_shape(self, pipeline, ref_image):
        z = pipeline.encode_image(ref_image)
        with pytest.raises(ValueError):
            pipeline.manipulate_backward(
                np.zeros((150, 4)), np.zeros((10, 150)), z, H, targets=[], steps=1
            )


class TestManipulateForward:
    def test_unedited_equals_complete_on_rerender(self, pipeline, ref_image):
        z = pipeline.encode_image(ref_image)
        graph, _, _ = pipeline.predict(z, H)
        rendered, result = pipeline.manipulate_forward(graph, [X])
        direct = pipeline.complete(rendered, H, [X])
        assert raster.png_bytes(result.entries[X].image) == raster.png_bytes(
            direct.entries[X].image
        )

    def test_zero_targets_empty(self, pipeline, ref_image):
        z = pipeline.encode_image(ref_image)
        graph, _, _ = pipeline.predict(z, H)
        _, result = pipeline.manipulate_forward(graph, [])
        assert result.entries == {}

    def test_untrained_renderer_rejected(self, pipeline, ref_image):
        z = pipeline.encode_image(ref_image)
        graph, _, _ = pipeline.predict(z, X)  # no renderer for X
        with pytest.raises(tasks.UntrainedRendererError):
            pipeline.manipulate_forward(graph, [H])


class TestMaterialize:
    def test_valid_graph_from_garbage(self):
        rng = np.random.default_rng(5)
        raw = rng.normal(0.5, 1.0, size=(150, 4))
        graph = tasks.materialize_graph(X, raw)
        assert gg.validate_graph(graph) == []

    def test_zero_tangent_fallback(self):
        raw = np.zeros((150, 4))
        raw[:, 0] = np.linspace(0.1, 0.9, 150)
        raw[:, 1] = 0.5
        graph = tasks.materialize_graph(X, raw)
        norms = np.linalg.norm(graph.nodes[:, 2:4], axis=1)
        assert np.abs(norms - 1).max() < 1e-9

    def test_duplicates_nudged_apart(self):
        raw = np.zeros((150, 4))
        raw[:, 0] = 0.5
        raw[:, 1] = 0.5
        raw[:, 2] = 1.0
        graph = tasks.materialize_graph(X, raw)
        # Hermite vectorization must not hit a zero chord.
        raster.graph_to_outline(graph)


class TestExport:
    def test_export_writes_files(self, pipeline, ref_image, tmp_path):
        truth = {X: RasterImage.from_array(np.zeros((128, 128)))}
        result = pipeline.complete(ref_image, H, [X], ground_truth=truth)
        tasks.export_completion(result, tmp_path / "exp")
        assert (tmp_path / "exp" / "X.png").exists()
        assert (tmp_path / "exp" / "X.graph.json").exists()
        metrics = (tmp_path / "exp" / "metrics.json").read_text()
        assert "mse" in metrics
