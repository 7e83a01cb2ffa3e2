"""Named parameter store with Adam state and binary checkpoints.

Checkpoints are a directory holding ``manifest.json`` (names, shapes, dtypes,
step counts, byte offsets, arbitrary config payload) and ``weights.bin``, a
single little-endian float32 blob.  Writes go to a temp directory that is
renamed into place, so a checkpoint is either complete or absent.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import NonFiniteError, Tensor


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray | None = None
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step: int = 0
    trainable: bool = True

    def ensure_moments(self):
        if self.m is None:
            self.m = np.zeros_like(self.value)
            self.v = np.zeros_like(self.value)


class ParamStore:
    """Mapping from parameter path (e.g. "encoder.conv3.weight") to state.

    ``leaf`` hands out tape Tensors that share memory with the stored values;
    one leaf per name per step, so gradients from several loss terms
    accumulate on the same node.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Param] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._leaves: dict[str, Tensor] = {}

    # -- creation -----------------------------------------------------------

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> None:
        if name in self.params:
            raise KeyError(f"parameter {name!r} already exists")
        self.params[name] = Param(value=np.asarray(value, dtype=self.dtype), trainable=trainable)

    def add_buffer(self, name: str, value: np.ndarray) -> None:
        self.buffers[name] = np.asarray(value, dtype=self.dtype)

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def value(self, name: str) -> np.ndarray:
        return self.params[name].value

    def buffer(self, name: str) -> np.ndarray:
        return self.buffers[name]

    # -- tape integration ----------------------------------------------------

    def begin_step(self) -> None:
        self._leaves.clear()

    def leaf(self, name: str) -> Tensor:
        t = self._leaves.get(name)
        if t is None:
            p = self.params[name]
            t = Tensor(p.value, requires_grad=p.trainable)
            self._leaves[name] = t
        return t

    def collect_grads(self) -> list[str]:
        """Move leaf gradients into the store; returns the touched names."""
        touched = []
        for name, leaf in self._leaves.items():
            if leaf.grad is None:
                continue
            p = self.params[name]
            if p.grad is None:
                p.grad = leaf.grad
            else:
                p.grad += leaf.grad
            touched.append(name)
        return touched

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None


def adam_step(
    store: ParamStore,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    lr_scales: dict[str, float] | None = None,
) -> int:
    """Bias-corrected Adam on every trainable parameter holding a gradient.

    Gradients are zeroed and step counts incremented; parameters that took no
    part in the step (grad is None) are left untouched.  ``lr_scales`` maps
    name prefixes to learning-rate multipliers (longest matching prefix wins),
    e.g. to slow a head down relative to the trunk.  Returns the number of
    updated parameters.
    """
    updated = 0
    prefixes = sorted(lr_scales or {}, key=len, reverse=True)
    for name, p in store.params.items():
        if not p.trainable or p.grad is None:
            continue
        scale = 1.0
        for pref in prefixes:
            if name.startswith(pref):
                scale = lr_scales[pref]
                break
        g = p.grad
        if not math.isfinite(float(g.sum(dtype=np.float64))):
            raise NonFiniteError(f"non-finite gradient for {name!r}")
        p.ensure_moments()
        p.step += 1
        p.m += (1.0 - beta1) * (g - p.m)
        p.v += (1.0 - beta2) * (g * g - p.v)
        # Fold both bias corrections into scalars to avoid full-size temps:
        # lr * mhat / (sqrt(vhat) + eps) == a * m / (sqrt(v) + e).
        c2 = math.sqrt(1.0 - beta2**p.step)
        a = lr * c2 / (1.0 - beta1**p.step)
        buf = np.sqrt(p.v)
        buf += eps * c2
        np.divide(p.m, buf, out=buf)
        buf *= a
        p.value -= buf.astype(p.value.dtype, copy=False)
        p.grad = None
        updated += 1
    return updated


# ---------------------------------------------------------------------------
# Initialization


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(
    store: ParamStore,
    path: Path | str,
    config: dict | None = None,
    include_optimizer: bool = False,
) -> None:
    path = Path(path)
    entries = []
    blobs: list[np.ndarray] = []
    offset = 0

    def put(arr: np.ndarray) -> tuple[int, int]:
        nonlocal offset
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        blobs.append(arr32)
        start = offset
        offset += arr32.nbytes
        return start, arr32.nbytes

    for name in sorted(store.params):
        p = store.params[name]
        off, nbytes = put(p.value)
        entry = {
            "name": name,
            "shape": list(p.value.shape),
            "dtype": "float32",
            "offset": off,
            "nbytes": nbytes,
            "step": p.step,
            "trainable": p.trainable,
        }
        if include_optimizer and p.m is not None:
            entry["offset_m"], _ = put(p.m)
            entry["offset_v"], _ = put(p.v)
        entries.append(entry)
    buffer_entries = []
    for name in sorted(store.buffers):
        off, nbytes = put(store.buffers[name])
        buffer_entries.append(
            {
                "name": name,
                "shape": list(store.buffers[name].shape),
                "dtype": "float32",
                "offset": off,
                "nbytes": nbytes,
            }
        )

    manifest = {
        "format": 1,
        "dtype": store.dtype.name,
        "config": config or {},
        "params": entries,
        "buffers": buffer_entries,
    }
    tmp = Path(tempfile.mkdtemp(dir=path.parent if path.parent.exists() else None))
    try:
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=1))
        with (tmp / "weights.bin").open("wb") as fh:
            for b in blobs:
                fh.write(b.tobytes())
        if path.exists():
            shutil.rmtree(path)
        os.replace(tmp, path)
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_checkpoint(path: Path | str) -> tuple[ParamStore, dict]:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    blob = (path / "weights.bin").read_bytes()
    store = ParamStore(dtype=manifest.get("dtype", "float32"))

    def pull(offset: int, shape) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=offset)
        return arr.reshape(shape).astype(store.dtype)

    for e in manifest["params"]:
        p = Param(
            value=pull(e["offset"], e["shape"]).copy(),
            step=e.get("step", 0),
            trainable=e.get("trainable", True),
        )
        if "offset_m" in e:
            p.m = pull(e["offset_m"], e["shape"]).copy()
            p.v = pull(e["offset_v"], e["shape"]).copy()
        store.params[e["name"]] = p
    for e in manifest.get("buffers", []):
        store.buffers[e["name"]] = pull(e["offset"], e["shape"]).copy()
    return store, manifest.get("config", {})
