"""Training objectives for the four learned components."""

from __future__ import annotations

import numpy as np

from .. import tensor as T

_CLAMP = 1e-7


def loss_cls(logits: T.Tensor, labels: np.ndarray) -> T.Tensor:
    """Mean negative log probability of the true font (softmax NLL)."""
    labels = np.asarray(labels)
    b, s = logits.shape
    if labels.min() < 0 or labels.max() >= s:
        raise ValueError(f"label out of range [0, {s})")
    shift = T.constant(logits.data.max(axis=1, keepdims=True))
    lse = T.log(T.reduce_sum(T.exp(logits - shift), axis=1)) + T.reshape(shift, (b,))
    true_logit = logits[np.arange(b), labels]
    return T.reduce_mean(lse - true_logit)


def loss_rec(mapping: T.Tensor, points: T.Tensor, nodes_truth: np.ndarray) -> T.Tensor:
    """Point reconstruction: batch mean of ||M^T P - N||_F in em units."""
    target = T.constant(np.asarray(nodes_truth, dtype=points.dtype))
    mapped = T.matmul(T.transpose(mapping, (0, 2, 1)), points)
    if mapped.shape != target.shape:
        raise T.ShapeError(
            f"loss_rec: mapped nodes {mapped.shape} vs truth {target.shape}"
        )
    diff = mapped - target
    per_sample = T.sqrt(T.reduce_sum(diff * diff, axis=(1, 2)))
    return T.reduce_mean(per_sample)


def loss_adj(adjacency: T.Tensor, truth: np.ndarray) -> T.Tensor:
    """Summed binary cross-entropy over all adjacency entries, batch mean."""
    a = T.clip(adjacency, _CLAMP, 1.0 - _CLAMP)
    t = T.constant(np.asarray(truth, dtype=adjacency.dtype))
    bce = -(t * T.log(a) + (1.0 - t) * T.log(1.0 - a))
    per_sample = T.reduce_sum(bce, axis=tuple(range(1, adjacency.ndim)))
    return T.reduce_mean(per_sample)


def loss_img(pred: T.Tensor, truth: np.ndarray) -> T.Tensor:
    """Pixel-wise mean squared error."""
    t = T.constant(np.asarray(truth, dtype=pred.dtype))
    if pred.shape != t.shape:
        raise T.ShapeError(f"loss_img: pred {pred.shape} vs truth {t.shape}")
    diff = pred - t
    return T.reduce_mean(diff * diff)
