"""Node-to-partition assignment, halo expansion, and RPB1 file I/O."""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .rng import GOLDEN, mix64, mix64_array

RPB1_MAGIC = b"RPB1"


@dataclass
class PartitionBook:
    k: int
    owner: np.ndarray  # int64, len num_nodes, values in [0, k)
    halo: list[np.ndarray] = field(default_factory=list)  # per partition, sorted

    def owned(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.owner == p)


def partition_random(g: Graph, k: int, seed: int) -> PartitionBook:
    """Hash each node id to a partition; deterministic in (seed, id)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = np.arange(g.num_nodes, dtype=np.uint64)
    h = mix64_array((ids + np.uint64(1)) * np.uint64(GOLDEN) ^ np.uint64(mix64(seed)))
    owner = (h % np.uint64(k)).astype(np.int64)
    return PartitionBook(k=k, owner=owner)


def partition_edgecut(g: Graph, k: int) -> PartitionBook:
    """Streaming linear deterministic greedy partitioner.

    Nodes are visited in BFS order from node 0 (restarting at the lowest
    unvisited node per component). Each node goes to the non-full
    partition maximizing |assigned neighbors in p| * (1 - size_p/capacity)
    with capacity = ceil(1.05 * n / k); ties break to the least-loaded
    partition, then to the lowest index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = g.num_nodes
    capacity = int(np.ceil(1.05 * n / k))
    owner = np.full(n, -1, dtype=np.int64)
    sizes = np.zeros(k, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    queue: deque[int] = deque()
    next_start = 0
    for _ in range(n):
        if not queue:
            while visited[next_start]:
                next_start += 1
            queue.append(next_start)
            visited[next_start] = True
        v = queue.popleft()
        nbrs = g.neighbors(v)
        assigned = owner[nbrs]
        counts = np.bincount(assigned[assigned >= 0], minlength=k).astype(np.float64)
        scores = counts * (1.0 - sizes / capacity)
        scores[sizes >= capacity] = -np.inf
        # ties (e.g. the zero-score start of a new component) go to the
        # least-loaded partition, then to the lowest index
        best = np.flatnonzero(scores == scores.max())
        p = int(best[np.argmin(sizes[best])])
        owner[v] = p
        sizes[p] += 1
        for u in nbrs:
            if not visited[u]:
                visited[u] = True
                queue.append(int(u))
    return PartitionBook(k=k, owner=owner)


def halo_expand(g: Graph, book: PartitionBook) -> PartitionBook:
    """Fill halo[p] with non-owned nodes one hop from p's owned nodes."""
    src = np.repeat(np.arange(g.num_nodes, dtype=np.int64), g.degrees())
    dst = g.indices
    halos = []
    for p in range(book.k):
        mask = (book.owner[src] == p) & (book.owner[dst] != p)
        halos.append(np.unique(dst[mask]))
    return PartitionBook(k=book.k, owner=book.owner, halo=halos)


def edge_cut(g: Graph, owner: np.ndarray) -> int:
    """Number of undirected edges crossing partitions."""
    src = np.repeat(np.arange(g.num_nodes, dtype=np.int64), g.degrees())
    return int(np.count_nonzero(owner[src] != owner[g.indices])) // 2


_RPB_HEADER = struct.Struct("<4sIQ")


def save_partition(book: PartitionBook, path) -> None:
    with open(path, "wb") as f:
        f.write(_RPB_HEADER.pack(RPB1_MAGIC, book.k, len(book.owner)))
        f.write(book.owner.astype("<u4").tobytes())


def load_partition(path) -> PartitionBook:
    """Read an RPB1 file. Halos are recomputed by the caller via halo_expand."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _RPB_HEADER.size:
        raise ValueError("file too short for RPB1 header")
    magic, k, num_nodes = _RPB_HEADER.unpack_from(data)
    if magic != RPB1_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    expected = _RPB_HEADER.size + 4 * num_nodes
    if len(data) < expected:
        raise OSError("truncated RPB1 payload")
    owner = np.frombuffer(data, dtype="<u4", count=num_nodes, offset=_RPB_HEADER.size)
    return PartitionBook(k=k, owner=owner.astype(np.int64))
