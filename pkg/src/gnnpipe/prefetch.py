"""Asynchronous per-epoch feature prefetcher.

A single producer thread assembles each upcoming batch's feature bundle
(local shard reads + cache hits + fallback pulls) into a bounded queue of
depth Q; the trainer consumes bundles strictly in plan order. With the
producer holding at most one bundle in hand, at most Q+1 assembled
bundles exist beyond the steady cache at any instant.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass

import numpy as np

from .cache import FeatureCache
from .plan import BatchPlan
from .sampler import ComputationBlock
from .store import StoreClient, StoreShard, TransferAccount


class PrefetchError(RuntimeError):
    def __init__(self, batch: int, cause: BaseException):
        super().__init__(f"bundle assembly failed at batch {batch}: {cause}")
        self.batch = batch


@dataclass
class FeatureBundle:
    epoch: int
    batch: int
    block: ComputationBlock
    rows: np.ndarray  # |input_nodes| x feat_dim, aligned to input_nodes
    n_local: int
    n_cache_hit: int
    n_fallback: int


def assemble_bundle(
    block: ComputationBlock,
    owner: np.ndarray,
    my_part: int,
    shard: StoreShard,
    client: StoreClient,
    cache: FeatureCache | None,
    account: TransferAccount | None,
) -> FeatureBundle:
    """Gather the feature rows a block needs, in input_nodes order.

    Locally owned rows are read straight from the worker's shard memory
    (zero RPC). Remote rows go through the cache when one is present;
    only the misses fall back to a sync pull, so the fallback account is
    charged node-granularly.
    """
    ids = block.input_nodes
    rows = np.empty((len(ids), shard.feat_dim), dtype=np.float32)
    local_pos = np.flatnonzero(owner[ids] == my_part)
    remote_pos = np.flatnonzero(owner[ids] != my_part)
    if len(local_pos):
        rows[local_pos] = shard.rows_for_local(ids[local_pos])
    n_hit = 0
    n_fallback = 0
    if len(remote_pos):
        remote_ids = ids[remote_pos]
        if cache is not None:
            res = cache.lookup(remote_ids)
            if len(res.found_pos):
                rows[remote_pos[res.found_pos]] = res.found_rows
            if len(res.missing_pos):
                rows[remote_pos[res.missing_pos]] = client.sync_pull(
                    res.missing_ids, account
                )
            n_hit = len(res.found_pos)
            n_fallback = len(res.missing_pos)
        else:
            rows[remote_pos] = client.sync_pull(remote_ids, account)
            n_fallback = len(remote_pos)
    return FeatureBundle(
        epoch=block.epoch,
        batch=block.batch,
        block=block,
        rows=rows,
        n_local=len(local_pos),
        n_cache_hit=n_hit,
        n_fallback=n_fallback,
    )


class Prefetcher:
    """Single-producer single-consumer pipeline for one epoch's batches."""

    def __init__(
        self,
        plan: BatchPlan,
        epoch: int,
        owner: np.ndarray,
        my_part: int,
        shard: StoreShard,
        client: StoreClient,
        cache: FeatureCache | None,
        account: TransferAccount | None,
        depth: int = 3,
        start_batch: int = 0,
    ):
        if depth < 1:
            raise ValueError("prefetch depth must be >= 1")
        self._queue: queue.Queue = queue.Queue(maxsize=depth)
        self._stop = threading.Event()
        self._exhausted = False
        args = (plan, epoch, owner, my_part, shard, client, cache, account, start_batch)
        self._producer = threading.Thread(target=self._produce, args=args, daemon=True)
        self._producer.start()

    def _produce(self, plan, epoch, owner, my_part, shard, client, cache,
                 account, start_batch) -> None:
        i = start_batch
        try:
            for i in range(start_batch, plan.num_batches(epoch)):
                if self._stop.is_set():
                    return
                block = plan.block(epoch, i)
                bundle = assemble_bundle(block, owner, my_part, shard, client,
                                         cache, account)
                self._put(bundle)
                if self._stop.is_set():
                    return
            self._put(None)  # end-of-epoch marker
        except BaseException as exc:  # surfaced on the consumer side
            exc._prefetch_batch = i  # type: ignore[attr-defined]
            self._put(exc)

    def _put(self, item) -> None:
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.05)
                return
            except queue.Full:
                continue

    def next_bundle(self) -> FeatureBundle | None:
        """Block for the next in-order bundle; None once the epoch is done."""
        if self._exhausted:
            return None
        item = self._queue.get()
        if item is None:
            self._exhausted = True
            return None
        if isinstance(item, BaseException):
            self._exhausted = True
            raise PrefetchError(getattr(item, "_prefetch_batch", -1), item) from item
        return item

    def drain(self) -> None:
        """Stop the producer and discard anything buffered; idempotent."""
        self._stop.set()
        while True:
            try:
                self._queue.get_nowait()
            except queue.Empty:
                break
        self._producer.join()
        self._exhausted = True
