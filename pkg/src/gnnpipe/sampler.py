"""Seeded mini-batch generation and multi-layer neighbor sampling.

Neighbor selection is keyed per (rng_seed, expansion step, node): every
neighbor of a frontier node gets a counter-derived 64-bit key and the
fanout smallest keys win. With i.i.d. keys every k-subset is equally
likely, so the draw is uniform without replacement, and because streams
are keyed by node id the result does not depend on frontier iteration
order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .rng import GOLDEN, MASK64, mix64, mix64_array, shuffled

_SHUFFLE_TAG = 0x73687566  # domain-separates batch shuffling from sampling


@dataclass(frozen=True)
class SeedSchedule:
    """Injective (epoch, batch) -> 64-bit seed map shared by all workers."""

    s0: int
    epochs: int
    batches_per_epoch: int


def seed_for(s: SeedSchedule, e: int, i: int) -> int:
    """Mixed seed for batch i of epoch e; injective over the run.

    The SplitMix64 finalizer is a bijection and e*2^32 + i is injective
    for e, i < 2^32, so no two (e, i) pairs share a seed.
    """
    if not (0 <= e < s.epochs and 0 <= i < s.batches_per_epoch):
        raise IndexError(f"(e={e}, i={i}) outside schedule")
    return mix64(s.s0 ^ ((e << 32) | i))


def epoch_batches(
    train_nodes: np.ndarray, batch_size: int, s: SeedSchedule, e: int
) -> list[np.ndarray]:
    """Shuffle the train set with this epoch's seed and chunk it.

    The batches partition the train set: every train node appears in
    exactly one batch per epoch.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if len(train_nodes) == 0:
        raise ValueError("empty train set")
    perm = shuffled(np.asarray(train_nodes, dtype=np.int64),
                    seed_for(s, e, 0) ^ _SHUFFLE_TAG)
    return [perm[i : i + batch_size] for i in range(0, len(perm), batch_size)]


@dataclass
class ComputationBlock:
    """Layered subgraph for one mini-batch.

    frontiers[0] is the sorted unique seed set; frontiers[d+1] extends
    frontiers[d] with the neighbors sampled at expansion step d, so the
    frontiers are nested and frontiers[-1] is the input node set.
    edges[d] holds (src, dst) pairs with dst in frontiers[d], sorted by
    (dst, src) so aggregation order is fixed.
    """

    epoch: int
    batch: int
    seeds: np.ndarray
    frontiers: list[np.ndarray]
    edges: list[tuple[np.ndarray, np.ndarray]]

    @property
    def input_nodes(self) -> np.ndarray:
        return self.frontiers[-1]

    @property
    def num_layers(self) -> int:
        return len(self.edges)


def _sample_neighbors(
    g: Graph, frontier: np.ndarray, fanout: int, step_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sample min(fanout, deg(v)) distinct neighbors for each frontier node."""
    start = g.indptr[frontier]
    deg = (g.indptr[frontier + 1] - start).astype(np.int64)
    take = np.minimum(deg, fanout)
    total = int(deg.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)

    group_starts = np.concatenate([[0], np.cumsum(deg)[:-1]])
    rep = np.repeat(np.arange(len(frontier)), deg)
    pos_in_slice = np.arange(total, dtype=np.int64) - np.repeat(group_starts, deg)
    nbrs = g.indices[np.repeat(start, deg) + pos_in_slice]

    node_key = mix64_array(
        (frontier.astype(np.uint64) + np.uint64(1)) * np.uint64(GOLDEN)
        ^ np.uint64(step_seed & MASK64)
    )
    keys = mix64_array(
        node_key[rep] + (pos_in_slice.astype(np.uint64) + np.uint64(1))
        * np.uint64(GOLDEN)
    )
    order = np.lexsort((keys, rep))
    rank = np.arange(total, dtype=np.int64) - np.repeat(group_starts, deg)
    kept = order[rank < np.repeat(take, deg)]
    return nbrs[kept], frontier[rep[kept]]


def sample_block(
    g: Graph,
    seeds: np.ndarray,
    fanouts: list[int],
    rng_seed: int,
    epoch: int = 0,
    batch: int = 0,
) -> ComputationBlock:
    """Build the computation block for one batch of seed nodes.

    fanouts are listed input layer first (the convention of the training
    CLI), so expansion step d away from the seeds uses
    fanouts[len(fanouts)-1-d]. Nodes whose degree is at or below the
    fanout keep their whole neighborhood; zero-degree nodes simply
    contribute no edges.
    """
    if len(fanouts) == 0:
        raise ValueError("fanouts must be nonempty")
    seeds = np.asarray(seeds, dtype=np.int64)
    if len(seeds) == 0:
        raise ValueError("seeds must be nonempty")
    num_layers = len(fanouts)
    frontier = np.unique(seeds)
    frontiers = [frontier]
    edges: list[tuple[np.ndarray, np.ndarray]] = []
    for d in range(num_layers):
        fanout = fanouts[num_layers - 1 - d]
        step_seed = mix64(rng_seed ^ ((d + 1) * GOLDEN))
        src, dst = _sample_neighbors(g, frontier, fanout, step_seed)
        order = np.lexsort((src, dst))
        src, dst = src[order], dst[order]
        edges.append((src, dst))
        frontier = np.union1d(frontier, src)
        frontiers.append(frontier)
    return ComputationBlock(
        epoch=epoch, batch=batch, seeds=seeds, frontiers=frontiers, edges=edges
    )
