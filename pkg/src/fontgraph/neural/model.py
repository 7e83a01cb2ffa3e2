"""The learned components: image encoder, font classifier, point-set decoder,
graph constructor, per-glyph neural renderer and the image-to-image baseline.

All parameters live in one ParamStore under dotted paths; glyph-conditional
banks are keyed ``<component>.g{c:02d}``.  Forward methods accept numpy
batches and return tape Tensors so losses stay differentiable.
"""

from __future__ import annotations

import zlib

import numpy as np

from .. import tensor as T
from ..glyphgraph import build_template
from .config import ModelConfig

ENCODER_CHANNELS = (16, 32, 64, 128, 128)
DECODER_CHANNELS = (128, 128, 64, 32)  # transpose-conv stack, first layer shared
DECODER_SEED_LEN = 25  # first layer expands z to this many positions
RENDERER_CONV = ((512, 256), (256, 256), (256, 128), (128, 128))
RENDERER_POOLS = (2, 3, 5, 5)  # 150 -> 75 -> 25 -> 5 -> 1
IMAGE_HEAD = (128, 64, 32, 16, 1)  # transpose-conv channels after the 8x4x4 seed


def _rng_for(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, zlib.crc32(name.encode()))))


def _band_logits(m: int, n: int, kappa: float = 8.0, width: float = 1.5) -> np.ndarray:
    """Soft diagonal preference of node columns for sequence positions.

    kappa must clear ln(m) by a few nats, otherwise the flat background of a
    column (m-ish entries at logit 0) outweighs the band and every node reads
    mostly the global point average.
    """
    i = np.arange(m)[:, None] / m
    j = np.arange(n)[None, :] / n
    sigma = width / n
    return kappa * np.exp(-((i - j) ** 2) / (2 * sigma**2))


def glyph_key(c: int) -> str:
    return f"g{c:02d}"


class FontModel:
    def __init__(self, config: ModelConfig, store: T.ParamStore, seed: int = 0):
        self.config = config
        self.store = store
        self.seed = seed

    # ------------------------------------------------------------------
    # Parameter creation

    @staticmethod
    def create(config: ModelConfig, seed: int = 0) -> "FontModel":
        store = T.ParamStore(dtype=config.dtype)
        model = FontModel(config, store, seed)
        model._init_encoder("encoder")
        model._init_classifier()
        model._init_decoder()
        model._init_constructor()
        return model

    def _add_conv(self, name: str, cout: int, cin: int, *kernel: int):
        rng = _rng_for(self.seed, name)
        fan_in = cin * int(np.prod(kernel))
        self.store.add(
            f"{name}.weight",
            T.kaiming_uniform(rng, (cout, cin, *kernel), fan_in, self.store.dtype),
        )
        self.store.add(f"{name}.bias", np.zeros(cout, dtype=self.store.dtype))

    def _add_conv_transpose(self, name: str, cin: int, cout: int, *kernel: int):
        rng = _rng_for(self.seed, name)
        fan_in = cin * int(np.prod(kernel))
        self.store.add(
            f"{name}.weight",
            T.kaiming_uniform(rng, (cin, cout, *kernel), fan_in, self.store.dtype),
        )
        self.store.add(f"{name}.bias", np.zeros(cout, dtype=self.store.dtype))

    def _add_linear(self, name: str, out_features: int, in_features: int):
        rng = _rng_for(self.seed, name)
        self.store.add(
            f"{name}.weight",
            T.kaiming_uniform(rng, (out_features, in_features), in_features, self.store.dtype),
        )
        self.store.add(f"{name}.bias", np.zeros(out_features, dtype=self.store.dtype))

    def _add_bn(self, name: str, channels: int):
        self.store.add(f"{name}.gamma", np.ones(channels, dtype=self.store.dtype))
        self.store.add(f"{name}.beta", np.zeros(channels, dtype=self.store.dtype))
        self.store.add_buffer(f"{name}.running_mean", np.zeros(channels, dtype=self.store.dtype))
        self.store.add_buffer(f"{name}.running_var", np.ones(channels, dtype=self.store.dtype))

    def _init_encoder(self, prefix: str):
        cin = 1
        for i, cout in enumerate(ENCODER_CHANNELS, start=1):
            self._add_conv(f"{prefix}.conv{i}", cout, cin, 4, 4)
            self._add_bn(f"{prefix}.bn{i}", cout)
            cin = cout

    def _init_classifier(self):
        self._add_linear("classifier", self.config.s_fonts, self.config.latent_dim)

    def _init_decoder(self):
        cfg = self.config
        self._add_conv_transpose(
            "decoder.shared1", cfg.latent_dim, DECODER_CHANNELS[0], DECODER_SEED_LEN
        )
        self._add_bn("decoder.shared1.bn", DECODER_CHANNELS[0])
        for c in range(1, cfg.c_glyphs + 1):
            g = glyph_key(c)
            for i in range(1, len(DECODER_CHANNELS)):
                name = f"decoder.{g}.layer{i + 1}"
                self._add_conv_transpose(name, DECODER_CHANNELS[i - 1], DECODER_CHANNELS[i], 4)
                self._add_bn(f"{name}.bn", DECODER_CHANNELS[i])
        self._add_conv("decoder.head", cfg.point_dim, DECODER_CHANNELS[-1], 1)
        # Start the point cloud at the em-box center: coordinates around
        # (0.5, 0.5) rather than the origin, where no glyph mass ever lives.
        head_bias = self.store.value("decoder.head.bias")
        head_bias[0] = 0.5
        head_bias[1] = 0.5

    def _init_constructor(self):
        cfg = self.config
        d = cfg.d_model
        self._add_linear("constructor.backbone.in_proj", d, cfg.point_dim)
        # Learned positional table: decoded points arrive in sequence order
        # and the mapping head needs per-point identity to tell them apart.
        rng = _rng_for(self.seed, "constructor.backbone.pos")
        pos = rng.normal(0.0, 1.0, size=(cfg.m_points, d))
        self.store.add("constructor.backbone.pos.table", pos.astype(self.store.dtype))
        for proj in ("wq", "wk", "wv", "wo"):
            self._add_linear(f"constructor.backbone.{proj}", d, d)
        self._add_linear("constructor.backbone.ffn1", d, d)
        self._add_linear("constructor.backbone.ffn2", d, d)
        self._add_linear("constructor.backbone.out_proj", cfg.n_nodes, d)
        # Solve out_proj so the initial mapping logits form a soft positional
        # band (node j prefers points near j*m/n).  A uniform softmax start is
        # a rank-collapsed basin (every node reads the same blend) and a hard
        # random start freezes assignment collisions; the band is full-rank,
        # collision-free and can sharpen gradually as training proceeds.
        band = _band_logits(cfg.m_points, cfg.n_nodes)
        sol, *_ = np.linalg.lstsq(pos, band, rcond=None)  # (d, n)
        self.store.params["constructor.backbone.out_proj.weight"].value[:] = (
            sol.T.astype(self.store.dtype)
        )
        for c in range(1, cfg.c_glyphs + 1):
            g = glyph_key(c)
            self._add_linear(f"constructor.{g}.map", cfg.n_nodes, cfg.n_nodes)
            # Identity map head passes the banded logits through untouched.
            self.store.params[f"constructor.{g}.map.weight"].value[:] = np.eye(
                cfg.n_nodes, dtype=self.store.dtype
            )
            n1 = build_template(c).n1_total
            self._add_linear(f"constructor.{g}.adj.fc1", d, n1)
            self._add_linear(f"constructor.{g}.adj.fc2", d, d)
            self._add_linear(f"constructor.{g}.adj.fc3", n1 * n1, d)

    def ensure_renderer(self, c: int) -> None:
        g = glyph_key(c)
        if f"renderer.{g}.node_proj.weight" in self.store:
            return
        cfg = self.config
        self._add_linear(f"renderer.{g}.node_proj", cfg.d_model, cfg.point_dim)
        rng = _rng_for(self.seed, f"renderer.{g}.struct")
        self.store.add(
            f"renderer.{g}.struct.table",
            rng.normal(0.0, 0.1, size=(cfg.n_nodes, cfg.d_model)).astype(self.store.dtype),
        )
        for i, (cin, cout) in enumerate(RENDERER_CONV, start=1):
            self._add_conv(f"renderer.{g}.conv{i}", cout, cin, 3)
            self._add_bn(f"renderer.{g}.conv{i}.bn", cout)
        cin = 8
        for i, cout in enumerate(IMAGE_HEAD, start=1):
            self._add_conv_transpose(f"renderer.{g}.up{i}", cin, cout, 4, 4)
            if i < len(IMAGE_HEAD):
                self._add_bn(f"renderer.{g}.up{i}.bn", cout)
            cin = cout

    def ensure_baseline(self) -> None:
        if "baseline.encoder.conv1.weight" in self.store:
            return
        self._init_encoder("baseline.encoder")
        self._add_conv_transpose("baseline.decoder.shared1", 8, IMAGE_HEAD[0], 4, 4)
        self._add_bn("baseline.decoder.shared1.bn", IMAGE_HEAD[0])
        for c in range(1, self.config.c_glyphs + 1):
            g = glyph_key(c)
            cin = IMAGE_HEAD[0]
            for i, cout in enumerate(IMAGE_HEAD[1:], start=2):
                self._add_conv_transpose(f"baseline.decoder.{g}.layer{i}", cin, cout, 4, 4)
                if i < len(IMAGE_HEAD):
                    self._add_bn(f"baseline.decoder.{g}.layer{i}.bn", cout)
                cin = cout

    # ------------------------------------------------------------------
    # Forward passes

    def _bn(self, name: str, x: T.Tensor, training: bool) -> T.Tensor:
        return T.batch_norm(
            x,
            self.store.leaf(f"{name}.gamma"),
            self.store.leaf(f"{name}.beta"),
            self.store.buffer(f"{name}.running_mean"),
            self.store.buffer(f"{name}.running_var"),
            training=training,
        )

    def _encode_with(self, prefix: str, images: np.ndarray, training: bool) -> T.Tensor:
        cfg = self.config
        x = np.asarray(images, dtype=self.store.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.shape[-2:] != (cfg.image_size, cfg.image_size):
            raise T.ShapeError(
                f"encoder expects {cfg.image_size}x{cfg.image_size} images, got {x.shape}"
            )
        t = T.Tensor(x.reshape(-1, 1, cfg.image_size, cfg.image_size))
        for i in range(1, len(ENCODER_CHANNELS) + 1):
            t = T.conv2d(
                t,
                self.store.leaf(f"{prefix}.conv{i}.weight"),
                self.store.leaf(f"{prefix}.conv{i}.bias"),
                stride=2,
                padding=1,
            )
            t = self._bn(f"{prefix}.bn{i}", t, training)
            t = T.relu(t)
        return T.global_avg_pool(t)  # (B, latent)

    def encode(self, images: np.ndarray, training: bool = False) -> T.Tensor:
        """Style vector z (B, latent_dim) from grayscale glyph images."""
        return self._encode_with("encoder", images, training)

    def classify_logits(self, z: T.Tensor) -> T.Tensor:
        return T.linear(
            z, self.store.leaf("classifier.weight"), self.store.leaf("classifier.bias")
        )

    def classify(self, z: T.Tensor) -> T.Tensor:
        """Probabilities over the S training fonts (rows sum to 1)."""
        return T.softmax(self.classify_logits(z), axis=-1)

    def decode_points(self, z: T.Tensor, c: int, training: bool = False) -> T.Tensor:
        """Point set P (B, m, 4) for glyph c from style vectors z (B, latent)."""
        cfg = self.config
        self._check_glyph(c)
        g = glyph_key(c)
        t = T.reshape(z, (z.shape[0], cfg.latent_dim, 1))
        t = T.conv_transpose1d(
            t,
            self.store.leaf("decoder.shared1.weight"),
            self.store.leaf("decoder.shared1.bias"),
        )
        t = self._bn("decoder.shared1.bn", t, training)
        t = T.relu(t)
        for i in range(2, len(DECODER_CHANNELS) + 1):
            name = f"decoder.{g}.layer{i}"
            t = T.conv_transpose1d(
                t,
                self.store.leaf(f"{name}.weight"),
                self.store.leaf(f"{name}.bias"),
                stride=2,
                padding=1,
            )
            t = self._bn(f"{name}.bn", t, training)
            t = T.relu(t)
        t = T.conv1d(
            t, self.store.leaf("decoder.head.weight"), self.store.leaf("decoder.head.bias")
        )  # (B, 4, m)
        return T.transpose(t, (0, 2, 1))

    def _stroke_pool_matrix(self, c: int) -> np.ndarray:
        """Constant (n, n1) matrix averaging node columns over stroke spans."""
        template = build_template(c)
        mat = np.zeros((self.config.n_nodes, template.n1_total), dtype=self.store.dtype)
        for stroke, (lo, hi) in enumerate(template.stroke_node_spans()):
            mat[lo:hi, stroke] = 1.0 / (hi - lo)
        return mat

    def construct_graph(
        self, points: T.Tensor, c: int, training: bool = False
    ) -> tuple[T.Tensor, T.Tensor | None, T.Tensor]:
        """Mapping M_hat (B,m,n), adjacency A_hat (or None), nodes N_hat (B,n,4).

        The backbone is a single-layer transformer with residual attention and
        feed-forward blocks; the mapping head softmaxes each node's column
        over the m candidate points; the adjacency head pools backbone
        features over each stroke's node span.  With the fixed per-glyph
        template (the default) the predicted adjacency is bypassed and the
        template matrix A_c is attached downstream instead.
        """
        cfg = self.config
        self._check_glyph(c)
        g = glyph_key(c)
        bb = "constructor.backbone"
        h = T.linear(
            points, self.store.leaf(f"{bb}.in_proj.weight"), self.store.leaf(f"{bb}.in_proj.bias")
        )
        pos = self.store.leaf(f"{bb}.pos.table")
        h = h + T.reshape(pos, (1, cfg.m_points, cfg.d_model))
        q = T.linear(h, self.store.leaf(f"{bb}.wq.weight"), self.store.leaf(f"{bb}.wq.bias"))
        k = T.linear(h, self.store.leaf(f"{bb}.wk.weight"), self.store.leaf(f"{bb}.wk.bias"))
        v = T.linear(h, self.store.leaf(f"{bb}.wv.weight"), self.store.leaf(f"{bb}.wv.bias"))
        att = T.attention(q, k, v)
        att = T.linear(att, self.store.leaf(f"{bb}.wo.weight"), self.store.leaf(f"{bb}.wo.bias"))
        h = h + att
        ff = T.relu(
            T.linear(h, self.store.leaf(f"{bb}.ffn1.weight"), self.store.leaf(f"{bb}.ffn1.bias"))
        )
        ff = T.linear(ff, self.store.leaf(f"{bb}.ffn2.weight"), self.store.leaf(f"{bb}.ffn2.bias"))
        h = h + ff
        feat = T.linear(
            h, self.store.leaf(f"{bb}.out_proj.weight"), self.store.leaf(f"{bb}.out_proj.bias")
        )  # (B, m, n)

        logits = T.linear(
            feat, self.store.leaf(f"constructor.{g}.map.weight"),
            self.store.leaf(f"constructor.{g}.map.bias"),
        )
        mapping = T.softmax(logits, axis=1)  # columns over the m points sum to 1
        nodes = T.matmul(T.transpose(mapping, (0, 2, 1)), points)

        adjacency = None
        if cfg.adjacency_loss:
            pool = T.matmul(feat, T.constant(self._stroke_pool_matrix(c)))  # (B,m,n1)
            pooled = T.reduce_mean(pool, axis=1)  # (B,n1)
            a = T.relu(
                T.linear(
                    pooled,
                    self.store.leaf(f"constructor.{g}.adj.fc1.weight"),
                    self.store.leaf(f"constructor.{g}.adj.fc1.bias"),
                )
            )
            a = T.relu(
                T.linear(
                    a,
                    self.store.leaf(f"constructor.{g}.adj.fc2.weight"),
                    self.store.leaf(f"constructor.{g}.adj.fc2.bias"),
                )
            )
            a = T.sigmoid(
                T.linear(
                    a,
                    self.store.leaf(f"constructor.{g}.adj.fc3.weight"),
                    self.store.leaf(f"constructor.{g}.adj.fc3.bias"),
                )
            )
            n1 = build_template(c).n1_total
            adjacency = T.reshape(a, (a.shape[0], n1, n1))
        return mapping, adjacency, nodes

    def render_nodes(self, nodes: T.Tensor, c: int, training: bool = False) -> T.Tensor:
        """Neural renderer: node attributes (B,n,4) -> images (B,H,W)."""
        cfg = self.config
        self._check_glyph(c)
        g = glyph_key(c)
        if f"renderer.{g}.node_proj.weight" not in self.store:
            raise KeyError(f"renderer parameters for glyph {c} not trained")
        per_node = T.linear(
            nodes,
            self.store.leaf(f"renderer.{g}.node_proj.weight"),
            self.store.leaf(f"renderer.{g}.node_proj.bias"),
        )  # (B, n, d)
        table = self.store.leaf(f"renderer.{g}.struct.table")  # (n, d)
        struct = T.broadcast_to(
            T.reshape(table, (1, cfg.n_nodes, cfg.d_model)),
            (nodes.shape[0], cfg.n_nodes, cfg.d_model),
        )
        t = T.concat([per_node, struct], axis=2)  # (B, n, 2d)
        t = T.transpose(t, (0, 2, 1))  # (B, 512, n)
        for i, pool in enumerate(RENDERER_POOLS, start=1):
            t = T.conv1d(
                t,
                self.store.leaf(f"renderer.{g}.conv{i}.weight"),
                self.store.leaf(f"renderer.{g}.conv{i}.bias"),
                padding=1,
            )
            t = self._bn(f"renderer.{g}.conv{i}.bn", t, training)
            t = T.relu(t)
            t = T.avg_pool1d(t, pool)
        emb = T.reshape(t, (t.shape[0], 128))  # length pooled to 1
        return self._image_head(f"renderer.{g}.up", emb, training)

    def _image_head(self, prefix: str, emb: T.Tensor, training: bool) -> T.Tensor:
        """(B,128) -> (B,H,W) through five stride-2 transpose convolutions."""
        t = T.reshape(emb, (emb.shape[0], 8, 4, 4))
        n_layers = len(IMAGE_HEAD)
        for i in range(1, n_layers + 1):
            t = T.conv_transpose2d(
                t,
                self.store.leaf(f"{prefix}{i}.weight"),
                self.store.leaf(f"{prefix}{i}.bias"),
                stride=2,
                padding=1,
            )
            if i < n_layers:
                t = self._bn(f"{prefix}{i}.bn", t, training)
                t = T.relu(t)
        t = T.sigmoid(t)
        return T.reshape(t, (t.shape[0], t.shape[2], t.shape[3]))

    def baseline_img2img(self, images: np.ndarray, c: int, training: bool = False) -> T.Tensor:
        """Direct image-to-image translation: same encoder shape, per-glyph decoder."""
        self._check_glyph(c)
        g = glyph_key(c)
        if "baseline.encoder.conv1.weight" not in self.store:
            raise KeyError("baseline parameters not initialized")
        z = self._encode_with("baseline.encoder", images, training)
        t = T.reshape(z, (z.shape[0], 8, 4, 4))
        t = T.conv_transpose2d(
            t,
            self.store.leaf("baseline.decoder.shared1.weight"),
            self.store.leaf("baseline.decoder.shared1.bias"),
            stride=2,
            padding=1,
        )
        t = self._bn("baseline.decoder.shared1.bn", t, training)
        t = T.relu(t)
        n_layers = len(IMAGE_HEAD)
        for i in range(2, n_layers + 1):
            name = f"baseline.decoder.{g}.layer{i}"
            t = T.conv_transpose2d(
                t,
                self.store.leaf(f"{name}.weight"),
                self.store.leaf(f"{name}.bias"),
                stride=2,
                padding=1,
            )
            if i < n_layers:
                t = self._bn(f"{name}.bn", t, training)
                t = T.relu(t)
        t = T.sigmoid(t)
        return T.reshape(t, (t.shape[0], t.shape[2], t.shape[3]))

    def _check_glyph(self, c: int):
        if not 1 <= c <= self.config.c_glyphs:
            raise KeyError(f"glyph id {c} out of range [1, {self.config.c_glyphs}]")

    def has_renderer(self, c: int) -> bool:
        return f"renderer.{glyph_key(c)}.node_proj.weight" in self.store
