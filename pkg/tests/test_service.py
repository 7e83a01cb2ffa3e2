import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fontgraph import glyphgraph as gg
from fontgraph import raster
from fontgraph import tensor as T
from fontgraph.neural import FontModel, ModelConfig
from fontgraph.raster import RasterImage
from fontgraph.service import create_app


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    model = FontModel.create(ModelConfig(s_fonts=2), seed=1)
    model.ensure_renderer(gg.glyph_id_of("H"))
    path = tmp_path_factory.mktemp("ckpt") / "svc"
    T.save_checkpoint(model.store, path, config={"model": model.config.to_dict()})
    app = create_app(path)
    return TestClient(app)


def png_payload(seed=0):
    rng = np.random.default_rng(seed)
    img = RasterImage.from_array(rng.uniform(0, 1, (128, 128)))
    return "data:image/png;base64," + base64.b64encode(raster.png_bytes(img)).decode()


@pytest.fixture(scope="module")
def session(client):
    resp = client.post("/encode", json={"image": png_payload(), "glyph": "H"})
    assert resp.status_code == 200
    return resp.json()["session_id"]


class TestHealthAndTemplate:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert "checkpoint" in body

    def test_template_wire_format(self, client):
        body = client.get("/glyph/H/template").json()
        assert body["glyph_id"] == gg.glyph_id_of("H")
        assert body["contours"] == [[15, 10]]
        assert len(body["adjacency"]) == 15 * 15
        assert len(body["nodes"]) == 150 * 4
        graph = gg.graph_from_dict(body)
        assert gg.validate_graph(graph) == []

    def test_template_unknown_glyph(self, client):
        assert client.get("/glyph/7Q/template").status_code == 404


class TestEncode:
    def test_encode_creates_session(self, client):
        resp = client.post("/encode", json={"image": png_payload(1), "glyph": "I"})
        body = resp.json()
        assert resp.status_code == 200
        assert body["z_summary"]["dim"] == 128
        assert body["graph"]["glyph_id"] == gg.glyph_id_of("I")

    def test_bad_image_422(self, client):
        resp = client.post("/encode", json={"image": "data:image/png;base64,!!!", "glyph": "H"})
        assert resp.status_code == 422
        assert resp.json()["code"] == "bad_image"

    def test_missing_fields_422(self, client):
        assert client.post("/encode", json={}).status_code == 422


class TestComplete:
    def test_all_excludes_input_glyph(self, client, session):
        resp = client.post("/complete", json={"session_id": session, "glyphs": "all"})
        assert resp.status_code == 200
        results = resp.json()["results"]
        assert len(results) == 25
        assert "H" not in results

    def test_explicit_targets(self, client, session):
        resp = client.post(
            "/complete", json={"session_id": session, "glyphs": ["X", "O"]}
        )
        results = resp.json()["results"]
        assert set(results) == {"X", "O"}
        assert results["X"]["png"].startswith("data:image/png;base64,")

    def test_unknown_session_404(self, client):
        resp = client.post("/complete", json={"session_id": "nope", "glyphs": ["X"]})
        assert resp.status_code == 404

    def test_neural_renderer_missing_409(self, client, session):
        resp = client.post(
            "/complete",
            json={"session_id": session, "glyphs": ["X"], "renderer": "neural"},
        )
        assert resp.status_code == 409


class TestEdit:
    def test_empty_edit_echoes_graph(self, client, session):
        before = client.post(
            "/edit", json={"session_id": session, "glyph": "H", "edits": []}
        )
        assert before.status_code == 200
        body = before.json()
        again = client.post(
            "/edit", json={"session_id": session, "glyph": "H", "edits": []}
        ).json()
        assert body["graph"] == again["graph"]
        assert body["png"] == again["png"]
        assert "outline" in body and "contours" in body["outline"]

    def test_absolute_edit_idempotent(self, client, session):
        template = client.get("/glyph/H/template").json()
        nodes = np.array(template["nodes"]).reshape(150, 4)
        edits = [[0, float(nodes[0, 0] + 0.01), float(nodes[0, 1]), 1.0, 0.0]]
        a = client.post(
            "/edit", json={"session_id": session, "glyph": "H", "edits": edits}
        ).json()
        b = client.post(
            "/edit", json={"session_id": session, "glyph": "H", "edits": edits}
        ).json()
        assert a["graph"] == b["graph"]

    def test_invalid_edit_422(self, client, session):
        resp = client.post(
            "/edit",
            json={"session_id": session, "glyph": "H", "edits": [[999, 0, 0, 1, 0]]},
        )
        assert resp.status_code == 422

    def test_zero_tangent_422(self, client, session):
        resp = client.post(
            "/edit",
            json={"session_id": session, "glyph": "H", "edits": [[0, 0.5, 0.5, 0, 0]]},
        )
        assert resp.status_code == 422

    def test_full_graph_payload(self, client, session):
        template = client.get("/glyph/I/template").json()
        resp = client.post(
            "/edit",
            json={"session_id": session, "glyph": "I", "graph": template, "edits": []},
        )
        assert resp.status_code == 200
        assert resp.json()["graph"]["nodes"] == template["nodes"]


class TestManipulate:
    def test_forward_roundtrip(self, client, session):
        resp = client.post(
            "/manipulate",
            json={"session_id": session, "glyph": "H", "mode": "forward", "targets": ["X"]},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert "X" in body["results"]
        assert body["input_png"].startswith("data:image/png")

    def test_forward_renderer_missing_409(self, client, session):
        resp = client.post(
            "/manipulate",
            json={"session_id": session, "glyph": "X", "mode": "forward", "targets": []},
        )
        assert resp.status_code == 409

    def test_backward_streams_objective(self, client, session):
        with client.stream(
            "POST",
            "/manipulate",
            json={
                "session_id": session,
                "glyph": "H",
                "mode": "backward",
                "steps": 200,
                "targets": ["X"],
            },
        ) as resp:
            assert resp.status_code == 200
            lines = [json.loads(l) for l in resp.iter_lines() if l]
        objective_rows = [l for l in lines if "objective" in l]
        assert len(objective_rows) == 3  # steps 0, 100, 200
        values = [l["objective"] for l in objective_rows]
        assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))
        assert "results" in lines[-1]

    def test_bad_mode_422(self, client, session):
        resp = client.post(
            "/manipulate", json={"session_id": session, "mode": "sideways"}
        )
        assert resp.status_code == 422


class TestInterpolate:
    def test_frames_for_lambda_grid(self, client, session):
        resp = client.post(
            "/interpolate",
            json={
                "session_id": session,
                "image2": png_payload(9),
                "lambdas": [1.0, 0.5, 0.0],
                "targets": ["X"],
            },
        )
        assert resp.status_code == 200
        frames = resp.json()["frames"]
        assert [f["lambda"] for f in frames] == [1.0, 0.5, 0.0]
        assert all("X" in f["results"] for f in frames)

    def test_bad_lambda_422(self, client, session):
        resp = client.post(
            "/interpolate",
            json={"session_id": session, "image2": png_payload(), "lambdas": [2.0]},
        )
        assert resp.status_code == 422
