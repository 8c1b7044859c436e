"""Double-buffered hot-node feature cache.

The steady buffer serves lookups for the current epoch while a secondary
buffer for the next epoch is filled by a background thread; the buffers
swap at the epoch boundary. Correctness never depends on the cache: a
failed secondary build just leaves the old steady buffer in place.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from .plan import BatchPlan, collect_access, top_hot
from .store import StoreClient, TransferAccount

log = logging.getLogger(__name__)


@dataclass
class CacheLookup:
    """Partition of a request into cache-resident and missing ids, with
    the request positions needed to reassemble rows in order."""

    found_pos: np.ndarray  # positions in the request
    found_rows: np.ndarray
    missing_pos: np.ndarray
    missing_ids: np.ndarray


class _Buffer:
    def __init__(self, hot_ids: np.ndarray, rows: np.ndarray, epoch_tag: int):
        self.hot_ids = hot_ids  # sorted ascending
        self.rows = rows
        self.epoch_tag = epoch_tag


class FeatureCache:
    def __init__(self, hot_ids: np.ndarray, rows: np.ndarray, epoch_tag: int = 0):
        self._steady = _Buffer(hot_ids, rows, epoch_tag)
        self.hits = 0
        self.misses = 0
        self._secondary: _Buffer | None = None
        self._builder: threading.Thread | None = None
        self._build_failed = False

    @property
    def hot_ids(self) -> np.ndarray:
        return self._steady.hot_ids

    def lookup(self, node_ids: np.ndarray) -> CacheLookup:
        ids = np.asarray(node_ids, dtype=np.int64)
        buf = self._steady
        if len(buf.hot_ids) == 0:
            self.misses += len(ids)
            return CacheLookup(
                found_pos=np.empty(0, dtype=np.int64),
                found_rows=np.empty((0, buf.rows.shape[1] if buf.rows.size else 0),
                                    dtype=np.float32),
                missing_pos=np.arange(len(ids), dtype=np.int64),
                missing_ids=ids,
            )
        pos = np.searchsorted(buf.hot_ids, ids)
        pos_clip = np.minimum(pos, len(buf.hot_ids) - 1)
        hit = buf.hot_ids[pos_clip] == ids
        found_pos = np.flatnonzero(hit)
        missing_pos = np.flatnonzero(~hit)
        self.hits += len(found_pos)
        self.misses += len(missing_pos)
        return CacheLookup(
            found_pos=found_pos,
            found_rows=buf.rows[pos_clip[found_pos]],
            missing_pos=missing_pos,
            missing_ids=ids[missing_pos],
        )

    def start_secondary_build(
        self,
        plan: BatchPlan,
        next_epoch: int,
        book,
        my_part: int,
        n_hot: int,
        client: StoreClient,
        fill_account: TransferAccount | None = None,
    ) -> None:
        """Kick off the concurrent build of the next epoch's buffer."""
        def _build() -> None:
            try:
                freq = collect_access(plan, book, my_part, epoch=next_epoch)
                hot = top_hot(freq, n_hot)
                rows = client.vector_pull(hot, fill_account)
                self._secondary = _Buffer(hot, rows, next_epoch)
            except Exception:
                log.warning("secondary cache build for epoch %d failed; keeping "
                            "the current steady cache", next_epoch, exc_info=True)
                self._build_failed = True

        self._build_failed = False
        self._builder = threading.Thread(target=_build, daemon=True)
        self._builder.start()

    def wait_secondary(self) -> None:
        """Block until an in-flight secondary build finishes (bounded work).

        Called at the epoch boundary before swap so that hit/miss
        accounting stays deterministic across runs.
        """
        if self._builder is not None:
            self._builder.join()
            self._builder = None

    def swap(self) -> bool:
        """Install the secondary buffer if one completed; reset counters.

        No-op (and returns False) when no completed secondary exists.
        Callers snapshot the epoch's hit/miss counters before swapping.
        """
        self.wait_secondary()
        if self._secondary is None:
            return False
        self._steady = self._secondary
        self._secondary = None
        self.hits = 0
        self.misses = 0
        return True

    def reuse_ratio(self) -> float | None:
        """hits / (hits + misses) this epoch; None with no traffic."""
        total = self.hits + self.misses
        if total == 0:
            return None
        return self.hits / total


def build_steady(
    hot_ids: np.ndarray,
    client: StoreClient,
    fill_account: TransferAccount | None = None,
    epoch_tag: int = 0,
) -> FeatureCache:
    """Bulk-fetch the hot set into a fresh cache (one RPC per owning shard)."""
    hot_ids = np.asarray(hot_ids, dtype=np.int64)
    rows = client.vector_pull(hot_ids, fill_account)
    return FeatureCache(hot_ids, rows, epoch_tag)
