"""HTTP facade over the completion/manipulation/interpolation pipelines.

JSON in and out; graphs travel in the glyphgraph wire format and images as
base64 PNG data URIs.  A session holds the current style vector plus the
per-glyph edited graphs; the checkpoint itself is immutable and shared.
"""

from __future__ import annotations

import base64
import binascii
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from . import glyphgraph as gg
from . import outline as ol
from . import raster
from . import tasks
from .glyphgraph import GlyphGraph
from .raster import RasterImage
from .synth import SynthFontParams, glyph_path

SESSION_TTL_SECONDS = 3600.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class SessionState:
    session_id: str
    z: np.ndarray | None = None
    input_glyph: int | None = None
    graphs: dict[int, GlyphGraph] = field(default_factory=dict)
    mappings: dict[int, np.ndarray] = field(default_factory=dict)
    last_access: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, ttl: float = SESSION_TTL_SECONDS):
        self.ttl = ttl
        self._sessions: dict[str, SessionState] = {}
        self._lock = threading.Lock()

    def create(self) -> SessionState:
        state = SessionState(session_id=uuid.uuid4().hex)
        with self._lock:
            self._sessions[state.session_id] = state
        return state

    def get(self, session_id: str) -> SessionState:
        with self._lock:
            self._expire()
            state = self._sessions.get(session_id)
            if state is None:
                raise ApiError(404, "unknown_session", f"session {session_id!r} not found")
            state.last_access = time.monotonic()
            return state

    def _expire(self):
        now = time.monotonic()
        dead = [k for k, s in self._sessions.items() if now - s.last_access > self.ttl]
        for k in dead:
            del self._sessions[k]


# ---------------------------------------------------------------------------
# Wire helpers


def _png_data_uri(img: RasterImage) -> str:
    return "data:image/png;base64," + base64.b64encode(raster.png_bytes(img)).decode()


def _decode_png(payload: str) -> RasterImage:
    if payload.startswith("data:"):
        try:
            payload = payload.split(",", 1)[1]
        except IndexError:
            raise ApiError(422, "bad_image", "malformed data URI")
    try:
        data = base64.b64decode(payload, validate=True)
        return raster.from_png_bytes(data)
    except (binascii.Error, OSError, ValueError) as e:
        raise ApiError(422, "bad_image", f"could not decode PNG: {e}")


def _glyph_id(value) -> int:
    if isinstance(value, int):
        if not 1 <= value <= gg.GLYPH_COUNT:
            raise ApiError(404, "unknown_glyph", f"glyph id {value} out of range")
        return value
    if isinstance(value, str):
        try:
            return gg.glyph_id_of(value.upper())
        except ValueError:
            raise ApiError(404, "unknown_glyph", f"unsupported glyph {value!r}")
    raise ApiError(422, "bad_glyph", f"cannot interpret glyph {value!r}")


def _z_summary(z: np.ndarray) -> dict:
    return {
        "dim": int(z.size),
        "norm": float(np.linalg.norm(z)),
        "mean": float(z.mean()),
        "min": float(z.min()),
        "max": float(z.max()),
    }


def _results_payload(result: tasks.CompletionResult) -> dict:
    out = {}
    for c, entry in result.entries.items():
        payload = {
            "graph": gg.graph_to_dict(entry.graph),
            "png": _png_data_uri(entry.image),
        }
        if entry.image_neural is not None:
            payload["png_neural"] = _png_data_uri(entry.image_neural)
        if entry.metrics is not None:
            payload["metrics"] = entry.metrics
        out[gg.glyph_letter(c)] = payload
    return out


# ---------------------------------------------------------------------------
# Application


def create_app(checkpoint: Path | str, session_ttl: float = SESSION_TTL_SECONDS) -> FastAPI:
    checkpoint = Path(checkpoint)
    if not checkpoint.exists():
        raise FileNotFoundError(f"checkpoint {checkpoint} not found")
    pipeline = tasks.Pipeline.load(checkpoint)
    sessions = SessionStore(ttl=session_ttl)
    reference_graphs: dict[int, GlyphGraph] = {}
    reference_lock = threading.Lock()

    app = FastAPI(title="glyph graph service")

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    def reference_graph(c: int) -> GlyphGraph:
        """Ground-truth graph of the built-in regular synthetic font.

        Serves as the editor's starting graph before any encode call.
        """
        with reference_lock:
            graph = reference_graphs.get(c)
            if graph is None:
                letter = gg.glyph_letter(c)
                outl = ol.normalize_outline(
                    ol.parse_path(glyph_path(letter, SynthFontParams()), 1.0, glyph_id=c)
                )
                graph = gg.build_graph(outl)
                reference_graphs[c] = graph
        return graph

    def current_graph(state: SessionState, c: int) -> GlyphGraph:
        graph = state.graphs.get(c)
        return graph if graph is not None else reference_graph(c)

    @app.get("/health")
    def health():
        return {"status": "ok", "checkpoint": str(checkpoint)}

    @app.get("/glyph/{glyph}/template")
    def template(glyph: str):
        c = _glyph_id(glyph if not glyph.isdigit() else int(glyph))
        return gg.graph_to_dict(reference_graph(c))

    @app.post("/encode")
    async def encode(request: Request):
        body = await request.json()
        if "image" not in body or "glyph" not in body:
            raise ApiError(422, "bad_request", "encode needs 'image' and 'glyph'")
        c = _glyph_id(body["glyph"])
        image = _decode_png(body["image"])
        if (image.width, image.height) != (128, 128):
            raise ApiError(422, "bad_image", "expected a 128x128 PNG")
        state = (
            sessions.get(body["session_id"]) if body.get("session_id") else sessions.create()
        )
        with state.lock:
            z = pipeline.encode_image(image)
            graph, mapping, _ = pipeline.predict(z, c)
            state.z = z
            state.input_glyph = c
            state.graphs[c] = graph
            state.mappings[c] = mapping
        return {
            "session_id": state.session_id,
            "z_summary": _z_summary(z),
            "graph": gg.graph_to_dict(graph),
        }

    @app.post("/complete")
    async def complete(request: Request):
        body = await request.json()
        state = sessions.get(body.get("session_id", ""))
        renderer = body.get("renderer", "conventional")
        if renderer not in ("conventional", "neural"):
            raise ApiError(422, "bad_renderer", f"unknown renderer {renderer!r}")
        with state.lock:
            if state.z is None:
                raise ApiError(409, "no_style", "encode an input glyph first")
            targets = body.get("glyphs", "all")
            if targets == "all":
                target_ids = [
                    c for c in range(1, gg.GLYPH_COUNT + 1) if c != state.input_glyph
                ]
            else:
                target_ids = [_glyph_id(t) for t in targets]
            try:
                result = pipeline.complete_from_style(state.z, target_ids, renderer)
            except tasks.UntrainedRendererError as e:
                raise ApiError(409, "renderer_missing", str(e))
            for c, entry in result.entries.items():
                state.graphs.setdefault(c, entry.graph)
        return {"results": _results_payload(result)}

    @app.post("/edit")
    async def edit(request: Request):
        body = await request.json()
        state = sessions.get(body.get("session_id", ""))
        c = _glyph_id(body.get("glyph"))
        with state.lock:
            if "graph" in body:
                try:
                    base = gg.graph_from_dict(body["graph"])
                except (gg.GraphValidationError, ValueError, KeyError) as e:
                    raise ApiError(422, "bad_graph", f"invalid graph payload: {e}")
            else:
                base = current_graph(state, c)
            edits = [tuple(e) for e in body.get("edits", [])]
            try:
                updated = gg.apply_edit(base, edits)
            except (IndexError, ValueError, gg.GraphValidationError) as e:
                raise ApiError(422, "bad_edit", str(e))
            state.graphs[c] = updated
            outline = raster.graph_to_outline(updated)
            img = raster.rasterize(outline, 128, 128)
        return {
            "graph": gg.graph_to_dict(updated),
            "png": _png_data_uri(img),
            "outline": json.loads(ol.outline_to_json(outline)),
        }

    @app.post("/manipulate")
    async def manipulate(request: Request):
        body = await request.json()
        state = sessions.get(body.get("session_id", ""))
        mode = body.get("mode", "forward")
        if mode not in ("forward", "backward"):
            raise ApiError(422, "bad_mode", f"unknown mode {mode!r}")
        targets = [_glyph_id(t) for t in body.get("targets", [])]
        c = _glyph_id(body.get("glyph", state.input_glyph or "H"))

        if mode == "forward":
            with state.lock:
                graph = current_graph(state, c)
                try:
                    rendered, result = pipeline.manipulate_forward(graph, targets)
                except tasks.UntrainedRendererError as e:
                    raise ApiError(409, "renderer_missing", str(e))
                state.z = result.style
            return {
                "z_summary": _z_summary(result.style),
                "input_png": _png_data_uri(rendered),
                "results": _results_payload(result),
            }

        # Backward mode: stream the objective every 100 steps, then the result.
        steps = int(body.get("steps", tasks.BACKWARD_STEPS))
        lr = float(body.get("lr", tasks.BACKWARD_LR))
        with state.lock:
            if state.z is None:
                raise ApiError(409, "no_style", "encode an input glyph first")
            if c not in state.mappings:
                raise ApiError(409, "no_mapping", "no stored mapping; encode this glyph first")
            graph = current_graph(state, c)
            z0 = state.z.copy()
            mapping = state.mappings[c]
            edited_nodes = graph.nodes.copy()

        def stream():
            try:
                z_new, records, result = pipeline.manipulate_backward(
                    edited_nodes, mapping, z0, c, targets, steps=steps, lr=lr
                )
            except FloatingPointError as e:
                yield json.dumps({"error": str(e)}) + "\n"
                return
            for step, obj in records:
                yield json.dumps({"step": step, "objective": obj}) + "\n"
            with state.lock:
                state.z = z_new
            yield json.dumps(
                {
                    "z_summary": _z_summary(z_new),
                    "results": _results_payload(result),
                }
            ) + "\n"

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.post("/interpolate")
    async def interpolate(request: Request):
        body = await request.json()
        state = sessions.get(body.get("session_id", ""))
        if "image2" not in body:
            raise ApiError(422, "bad_request", "interpolate needs 'image2'")
        image2 = _decode_png(body["image2"])
        lambdas = tuple(body.get("lambdas", tasks.DEFAULT_LAMBDAS))
        if any(not 0.0 <= l <= 1.0 for l in lambdas):
            raise ApiError(422, "bad_lambda", "lambda values must lie in [0, 1]")
        targets = [_glyph_id(t) for t in body.get("targets", [])]
        with state.lock:
            if state.z is None:
                raise ApiError(409, "no_style", "encode an input glyph first")
            z1 = state.z.copy()
        z2 = pipeline.encode_image(image2)
        frames = []
        for lam in lambdas:
            z = tasks.mix_styles(z1, z2, lam)
            result = pipeline.complete_from_style(z, targets)
            frames.append({"lambda": lam, "results": _results_payload(result)})
        return {"frames": frames}

    return app


def serve(checkpoint: Path | str, host: str = "127.0.0.1", port: int = 8000):
    import uvicorn

    app = create_app(checkpoint)
    uvicorn.run(app, host=host, port=port, log_level="warning")
