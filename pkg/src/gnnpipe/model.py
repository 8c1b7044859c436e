"""Mean-aggregator GNN with analytic gradients.

Per layer: h_v' = relu(W_self h_v + W_neigh mean_{u in sampled(v)} h_u + b),
with the relu dropped on the output layer. An empty sampled neighborhood
contributes a zero vector as its mean. Neighbor sums run in fixed
ascending (dst, src) order, so every reduction is bit-reproducible; the
baseline/pipelined mode-equivalence guarantee rests on that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph
from .sampler import ComputationBlock


@dataclass
class LayerParams:
    w_self: np.ndarray  # d_in x d_out
    w_neigh: np.ndarray  # d_in x d_out
    bias: np.ndarray  # d_out

    def astype(self, dtype) -> "LayerParams":
        return LayerParams(self.w_self.astype(dtype), self.w_neigh.astype(dtype),
                           self.bias.astype(dtype))


def layer_dims(feat_dim: int, hidden_dim: int, num_classes: int,
               num_layers: int) -> list[tuple[int, int]]:
    dims = [feat_dim] + [hidden_dim] * (num_layers - 1) + [num_classes]
    return list(zip(dims[:-1], dims[1:]))


def init_params(feat_dim: int, hidden_dim: int, num_classes: int,
                num_layers: int, seed: int, dtype=np.float32) -> list[LayerParams]:
    """Glorot-scaled normal init from a Philox stream keyed by seed."""
    rng = np.random.Generator(np.random.Philox(seed))
    params = []
    for d_in, d_out in layer_dims(feat_dim, hidden_dim, num_classes, num_layers):
        scale = np.sqrt(2.0 / (d_in + d_out))
        params.append(LayerParams(
            w_self=(rng.standard_normal((d_in, d_out)) * scale).astype(dtype),
            w_neigh=(rng.standard_normal((d_in, d_out)) * scale).astype(dtype),
            bias=np.zeros(d_out, dtype=dtype),
        ))
    return params


def _positions(haystack: np.ndarray, needles: np.ndarray) -> np.ndarray:
    # haystack sorted unique and guaranteed to contain every needle
    return np.searchsorted(haystack, needles)


def _forward_pass(block: ComputationBlock, rows: np.ndarray,
                  params: list[LayerParams]):
    """Run the layers; returns logits for frontiers[0] plus backprop state."""
    if len(params) != block.num_layers:
        raise ValueError(
            f"block has {block.num_layers} layers, params have {len(params)}")
    if rows.shape[0] != len(block.input_nodes):
        raise ValueError("rows not aligned to block.input_nodes")
    num_layers = len(params)
    h = rows
    saved = []
    for l, p in enumerate(params):
        d = num_layers - 1 - l
        dst_front = block.frontiers[d]
        src_front = block.frontiers[d + 1]
        src, dst = block.edges[d]
        src_pos = _positions(src_front, src)
        dst_pos = _positions(dst_front, dst)
        counts = np.bincount(dst_pos, minlength=len(dst_front)).astype(h.dtype)
        sums = np.zeros((len(dst_front), h.shape[1]), dtype=h.dtype)
        np.add.at(sums, dst_pos, h[src_pos])
        denom = np.maximum(counts, 1)[:, None]
        mean = sums / denom
        h_self = h[_positions(src_front, dst_front)]
        z = h_self @ p.w_self + mean @ p.w_neigh + p.bias
        saved.append((h, h_self, mean, z, src_pos, dst_pos, denom))
        h = np.maximum(z, 0) if l < num_layers - 1 else z
    return h, saved


def forward(block: ComputationBlock, rows: np.ndarray,
            params: list[LayerParams]) -> np.ndarray:
    """Logits aligned to frontiers[0] (the sorted unique seed set)."""
    logits, _ = _forward_pass(block, rows, params)
    return logits


def _softmax_ce(logits: np.ndarray, labels: np.ndarray):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = len(labels)
    nll = -(shifted[np.arange(n), labels] - np.log(exp.sum(axis=1)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1
    dlogits /= n
    return float(nll.mean()), dlogits.astype(logits.dtype)


def loss_and_grad(block: ComputationBlock, rows: np.ndarray, labels: np.ndarray,
                  params: list[LayerParams]) -> tuple[float, list[LayerParams]]:
    """Mean softmax cross-entropy over the block's seeds and its exact
    reverse-mode gradient for every parameter tensor."""
    logits, saved = _forward_pass(block, rows, params)
    seed_labels = labels[block.frontiers[0]]
    loss, dz = _softmax_ce(logits, seed_labels)
    num_layers = len(params)
    grads: list[LayerParams | None] = [None] * num_layers
    for l in range(num_layers - 1, -1, -1):
        p = params[l]
        h, h_self, mean, z, src_pos, dst_pos, denom = saved[l]
        if l < num_layers - 1:
            dz = dz * (z > 0)
        grads[l] = LayerParams(
            w_self=h_self.T @ dz,
            w_neigh=mean.T @ dz,
            bias=dz.sum(axis=0),
        )
        if l > 0:
            dh = np.zeros_like(h)
            d = num_layers - 1 - l
            dst_front = block.frontiers[d]
            src_front = block.frontiers[d + 1]
            dself = dz @ p.w_self.T
            np.add.at(dh, _positions(src_front, dst_front), dself)
            dmean = dz @ p.w_neigh.T
            np.add.at(dh, src_pos, (dmean / denom)[dst_pos])
            dz = dh
    return loss, grads  # type: ignore[return-value]


def sgd_step(params: list[LayerParams], grads: list[LayerParams],
             lr: float) -> list[LayerParams]:
    lr = np.asarray(lr, dtype=params[0].w_self.dtype)
    return [
        LayerParams(p.w_self - lr * g.w_self, p.w_neigh - lr * g.w_neigh,
                    p.bias - lr * g.bias)
        for p, g in zip(params, grads)
    ]


def full_forward(g: Graph, params: list[LayerParams]) -> np.ndarray:
    """Full-neighborhood (no sampling) forward over every node."""
    dtype = params[0].w_self.dtype
    deg = g.degrees()
    src = np.repeat(np.arange(g.num_nodes, dtype=np.int64), deg)
    inv_deg = 1.0 / np.maximum(deg, 1)
    adj = sp.csr_matrix(
        (np.repeat(inv_deg, deg).astype(dtype), (src, g.indices)),
        shape=(g.num_nodes, g.num_nodes),
    )
    h = g.features.astype(dtype)
    for l, p in enumerate(params):
        z = h @ p.w_self + (adj @ h) @ p.w_neigh + p.bias
        h = np.maximum(z, 0) if l < len(params) - 1 else z
    return h


def evaluate(g: Graph, params: list[LayerParams], mask: np.ndarray) -> float | None:
    """argmax accuracy on the masked nodes; None for an empty mask."""
    sel = np.flatnonzero(mask)
    if len(sel) == 0:
        return None
    logits = full_forward(g, params)[sel]
    return float(np.mean(np.argmax(logits, axis=1) == g.labels[sel]))
