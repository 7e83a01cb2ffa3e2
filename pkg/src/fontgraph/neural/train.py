"""Staged training: encoder pre-training, joint graph training, per-glyph
renderer training, and the image-to-image baseline.

Each stage consumes a DatasetBundle, appends rows to ``losses.csv``
(step, stage, loss, value) and writes a checkpoint directory holding the full
parameter store plus the model config.  Later stages must be pointed at the
previous stage's checkpoint; the joint stage extends the encoder checkpoint
in place of starting fresh.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import tensor as T
from ..dataset import DatasetBundle
from .config import ModelConfig
from .losses import loss_adj, loss_cls, loss_img, loss_rec
from .model import FontModel, glyph_key

STAGES = ("pretrain_encoder", "joint", "renderer", "baseline")


@dataclass
class TrainConfig:
    stage: str
    out_dir: Path
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    max_steps: int | None = None  # cap overriding the epoch count when set
    init_checkpoint: Path | None = None
    glyphs: list[int] | None = None  # renderer stage: subset to train
    lr_final: float | None = None  # cosine-decay target; None = constant lr

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}; expected one of {STAGES}")
        self.out_dir = Path(self.out_dir)

    def lr_at(self, step: int, budget: int) -> float:
        if self.lr_final is None or budget <= 1:
            return self.lr
        frac = min(1.0, step / (budget - 1))
        return self.lr_final + 0.5 * (self.lr - self.lr_final) * (
            1.0 + np.cos(np.pi * frac)
        )


class MissingCheckpointError(FileNotFoundError):
    pass


class _LossLog:
    def __init__(self, path: Path):
        self.path = path
        exists = path.exists()
        self.fh = path.open("a", newline="")
        self.writer = csv.writer(self.fh)
        if not exists:
            self.writer.writerow(["step", "stage", "loss", "value"])

    def row(self, step: int, stage: str, loss: str, value: float):
        self.writer.writerow([step, stage, loss, f"{value:.8g}"])

    def close(self):
        self.fh.close()


def _load_model(cfg: ModelConfig, train_cfg: TrainConfig, fresh: bool) -> FontModel:
    if train_cfg.init_checkpoint is not None:
        ckpt = Path(train_cfg.init_checkpoint)
        if not ckpt.exists():
            raise MissingCheckpointError(f"checkpoint {ckpt} not found")
        store, saved = T.load_checkpoint(ckpt)
        saved_cfg = ModelConfig.from_dict(saved["model"]) if "model" in saved else cfg
        return FontModel(saved_cfg, store, seed=train_cfg.seed)
    if not fresh:
        raise MissingCheckpointError(
            f"stage {train_cfg.stage!r} requires the previous stage's checkpoint"
        )
    return FontModel.create(cfg, seed=train_cfg.seed)


def _save(model: FontModel, train_cfg: TrainConfig, stage_meta: dict) -> Path:
    out = train_cfg.out_dir / "checkpoint"
    config = {
        "model": model.config.to_dict(),
        "stage": train_cfg.stage,
        "train": {
            **{
                k: (str(v) if isinstance(v, Path) else v)
                for k, v in dataclasses.asdict(train_cfg).items()
            },
            **stage_meta,
        },
    }
    T.save_checkpoint(model.store, out, config=config, include_optimizer=False)
    return out


def _step_budget(train_cfg: TrainConfig, steps_per_epoch: int) -> int:
    if train_cfg.max_steps is not None:
        return train_cfg.max_steps
    return train_cfg.epochs * max(1, steps_per_epoch)


def _single_thread_blas():
    """Our GEMMs are small; on few-core boxes the BLAS thread pool costs more
    than it buys.  No-op context manager when threadpoolctl is unavailable."""
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=1)
    except ImportError:  # pragma: no cover
        import contextlib

        return contextlib.nullcontext()


def train(bundle: DatasetBundle, model_cfg: ModelConfig, train_cfg: TrainConfig) -> Path:
    """Run one training stage and return the checkpoint path."""
    train_cfg.out_dir.mkdir(parents=True, exist_ok=True)
    log = _LossLog(train_cfg.out_dir / "losses.csv")
    try:
        with _single_thread_blas():
            if train_cfg.stage == "pretrain_encoder":
                model = _load_model(model_cfg, train_cfg, fresh=True)
                _run_pretrain(model, bundle, train_cfg, log)
            elif train_cfg.stage == "joint":
                model = _load_model(model_cfg, train_cfg, fresh=False)
                _run_joint(model, bundle, train_cfg, log)
            elif train_cfg.stage == "renderer":
                model = _load_model(model_cfg, train_cfg, fresh=False)
                _run_renderer(model, bundle, train_cfg, log)
            else:
                model = _load_model(model_cfg, train_cfg, fresh=True)
                _run_baseline(model, bundle, train_cfg, log)
    finally:
        log.close()
    return _save(model, train_cfg, {})


def _adam(model: FontModel, train_cfg: TrainConfig, step: int, budget: int):
    model.store.collect_grads()
    T.adam_step(
        model.store,
        lr=train_cfg.lr_at(step, budget),
        beta1=train_cfg.beta1,
        beta2=train_cfg.beta2,
    )


def _run_pretrain(model: FontModel, bundle: DatasetBundle, cfg: TrainConfig, log: _LossLog):
    rng = np.random.default_rng(cfg.seed)
    n = len(bundle.images)
    steps_per_epoch = max(1, n // cfg.batch_size)
    budget = _step_budget(cfg, steps_per_epoch)
    step = 0
    while step < budget:
        order = rng.permutation(n)
        for at in range(0, n, cfg.batch_size):
            if step >= budget:
                break
            idx = order[at : at + cfg.batch_size]
            model.store.begin_step()
            z = model.encode(bundle.images[idx], training=True)
            loss = loss_cls(model.classify_logits(z), bundle.font_index[idx])
            T.backward(loss)
            _adam(model, cfg, step, budget)
            step += 1
            log.row(step, "pretrain_encoder", "loss_cls", float(loss.data))


def _glyph_batches(bundle: DatasetBundle, rng: np.random.Generator, batch_size: int):
    """One epoch of per-glyph batches: (glyph id, row indices of that glyph)."""
    glyph_ids = np.unique(bundle.glyph_ids)
    batches = []
    for c in rng.permutation(glyph_ids):
        rows = bundle.rows_for_glyph(int(c))
        rows = rows[rng.permutation(len(rows))]
        for at in range(0, len(rows), batch_size):
            batches.append((int(c), rows[at : at + batch_size]))
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def _random_inputs_for(bundle: DatasetBundle, rows: np.ndarray, rng: np.random.Generator):
    """For each target row pick a same-font input glyph (the style reference)."""
    inputs = np.empty(len(rows), dtype=np.int64)
    for j, r in enumerate(rows):
        same_font = np.nonzero(bundle.font_index == bundle.font_index[r])[0]
        inputs[j] = rng.choice(same_font)
    return inputs


def _run_joint(model: FontModel, bundle: DatasetBundle, cfg: TrainConfig, log: _LossLog):
    mc = model.config
    rng = np.random.default_rng(cfg.seed + 1)
    steps_per_epoch = max(1, len(bundle.images) // cfg.batch_size)
    budget = _step_budget(cfg, steps_per_epoch)
    step = 0
    while step < budget:
        for c, rows in _glyph_batches(bundle, rng, cfg.batch_size):
            if step >= budget:
                break
            in_rows = _random_inputs_for(bundle, rows, rng)
            model.store.begin_step()
            z = model.encode(bundle.images[in_rows], training=True)
            cls = loss_cls(model.classify_logits(z), bundle.font_index[in_rows])
            points = model.decode_points(z, c, training=True)
            mapping, adjacency, _ = model.construct_graph(points, c, training=True)
            rec = loss_rec(mapping, points, bundle.nodes[rows])
            total = mc.w_rec * rec + mc.w_cls * cls
            parts = {"loss_rec": float(rec.data), "loss_cls": float(cls.data)}
            if mc.adjacency_loss and adjacency is not None:
                from ..glyphgraph import build_template

                truth = np.asarray(build_template(c).adjacency, dtype=np.float32)
                truth = np.broadcast_to(truth, adjacency.shape)
                adj = loss_adj(adjacency, truth)
                total = total + mc.w_adj * adj
                parts["loss_adj"] = float(adj.data)
            T.backward(total)
            _adam(model, cfg, step, budget)
            step += 1
            log.row(step, "joint", "loss_total", float(total.data))
            for k, v in parts.items():
                log.row(step, "joint", k, v)


def _run_renderer(model: FontModel, bundle: DatasetBundle, cfg: TrainConfig, log: _LossLog):
    rng = np.random.default_rng(cfg.seed + 2)
    glyphs = cfg.glyphs or sorted(int(c) for c in np.unique(bundle.glyph_ids))
    for c in glyphs:
        rows_all = bundle.rows_for_glyph(c)
        if len(rows_all) == 0:
            continue
        model.ensure_renderer(c)
        steps_per_epoch = max(1, len(rows_all) // cfg.batch_size)
        budget = _step_budget(cfg, steps_per_epoch)
        step = 0
        stage = f"renderer_{glyph_key(c)}"
        while step < budget:
            rows = rows_all[rng.permutation(len(rows_all))]
            for at in range(0, len(rows), cfg.batch_size):
                if step >= budget:
                    break
                idx = rows[at : at + cfg.batch_size]
                model.store.begin_step()
                pred = model.render_nodes(
                    T.constant(bundle.nodes[idx].astype(model.store.dtype)), c, training=True
                )
                loss = loss_img(pred, bundle.images[idx])
                T.backward(loss)
                _adam(model, cfg, step, budget)
                step += 1
                log.row(step, stage, "loss_img", float(loss.data))


def _run_baseline(model: FontModel, bundle: DatasetBundle, cfg: TrainConfig, log: _LossLog):
    rng = np.random.default_rng(cfg.seed + 3)
    model.ensure_baseline()
    steps_per_epoch = max(1, len(bundle.images) // cfg.batch_size)
    budget = _step_budget(cfg, steps_per_epoch)
    step = 0
    while step < budget:
        for c, rows in _glyph_batches(bundle, rng, cfg.batch_size):
            if step >= budget:
                break
            in_rows = _random_inputs_for(bundle, rows, rng)
            model.store.begin_step()
            pred = model.baseline_img2img(bundle.images[in_rows], c, training=True)
            loss = loss_img(pred, bundle.images[rows])
            T.backward(loss)
            _adam(model, cfg, step, budget)
            step += 1
            log.row(step, "baseline", "loss_img", float(loss.data))
