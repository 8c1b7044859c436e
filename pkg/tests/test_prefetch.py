import threading
import time

import numpy as np
import pytest

from gnnpipe.cache import build_steady
from gnnpipe.partition import partition_edgecut
from gnnpipe.plan import collect_access, generate_plan, top_hot
from gnnpipe.prefetch import PrefetchError, Prefetcher, assemble_bundle
from gnnpipe.store import (InprocTransport, StoreClient, StoreShard,
                           TransferAccount)


@pytest.fixture()
def setup(small_graph):
    g = small_graph
    train = np.flatnonzero(g.train_mask)
    plan = generate_plan(g, train, [3, 5], 64, 2, s0=7)
    book = partition_edgecut(g, 2)
    owner = book.owner
    shards = [
        StoreShard(p, np.flatnonzero(owner == p).astype(np.int64),
                   g.features[owner == p])
        for p in range(2)
    ]
    client = StoreClient(owner, [InprocTransport(s) for s in shards], g.feat_dim)
    return g, plan, book, owner, shards[0], client


class TestAssembleBundle:
    def test_rows_match_features(self, setup):
        g, plan, book, owner, shard, client = setup
        block = plan.block(0, 0)
        bundle = assemble_bundle(block, owner, 0, shard, client, None, None)
        assert np.array_equal(bundle.rows, g.features[block.input_nodes])
        assert bundle.n_local + bundle.n_fallback == len(block.input_nodes)
        assert bundle.n_cache_hit == 0

    def test_cache_splits_remote_traffic(self, setup):
        g, plan, book, owner, shard, client = setup
        block = plan.block(0, 0)
        remote = block.input_nodes[owner[block.input_nodes] != 0]
        cache = build_steady(remote[:5], client)
        acct = TransferAccount()
        bundle = assemble_bundle(block, owner, 0, shard, client, cache, acct)
        assert np.array_equal(bundle.rows, g.features[block.input_nodes])
        assert bundle.n_cache_hit == 5
        assert bundle.n_fallback == len(remote) - 5
        assert acct.nodes_pulled == bundle.n_fallback

    def test_full_cache_means_zero_fallback(self, setup):
        g, plan, book, owner, shard, client = setup
        block = plan.block(0, 0)
        remote = block.input_nodes[owner[block.input_nodes] != 0]
        cache = build_steady(remote, client)
        acct = TransferAccount()
        bundle = assemble_bundle(block, owner, 0, shard, client, cache, acct)
        assert bundle.n_fallback == 0
        assert acct.snapshot() == (0, 0, 0)

    def test_local_rows_cost_nothing(self, setup):
        g, plan, book, owner, shard, client = setup
        block = plan.block(0, 1)
        acct = TransferAccount()
        assemble_bundle(block, owner, 0, shard, client, None, acct)
        n_remote = int((owner[block.input_nodes] != 0).sum())
        assert acct.nodes_pulled == n_remote
        assert shard.rpc_calls == 0


class TestPrefetcher:
    def test_in_order_and_complete(self, setup):
        g, plan, book, owner, shard, client = setup
        pf = Prefetcher(plan, 0, owner, 0, shard, client, None, None, depth=3)
        seen = []
        while (b := pf.next_bundle()) is not None:
            seen.append(b.batch)
        assert seen == list(range(plan.num_batches(0)))
        assert pf.next_bundle() is None  # exhausted stays exhausted

    def test_bundles_match_synchronous_assembly(self, setup):
        g, plan, book, owner, shard, client = setup
        pf = Prefetcher(plan, 0, owner, 0, shard, client, None, None, depth=2)
        i = 0
        while (b := pf.next_bundle()) is not None:
            ref = assemble_bundle(plan.block(0, i), owner, 0, shard, client,
                                  None, None)
            assert np.array_equal(b.rows, ref.rows)
            i += 1

    def test_bounded_runahead(self, setup):
        g, plan, book, owner, shard, client = setup
        assembled = []
        orig = shard.rows_for_local

        def spy(ids):
            assembled.append(1)
            return orig(ids)

        shard.rows_for_local = spy
        pf = Prefetcher(plan, 0, owner, 0, shard, client, None, None, depth=2)
        deadline = time.monotonic() + 2
        while len(assembled) < 3 and time.monotonic() < deadline:
            time.sleep(0.01)
        time.sleep(0.2)  # producer should now be blocked on the full queue
        # queue depth 2 plus the one bundle in the producer's hand
        assert len(assembled) <= 3
        pf.drain()
        shard.rows_for_local = orig

    def test_start_batch_offset(self, setup):
        g, plan, book, owner, shard, client = setup
        pf = Prefetcher(plan, 0, owner, 0, shard, client, None, None,
                        depth=2, start_batch=2)
        first = pf.next_bundle()
        assert first is not None and first.batch == 2
        pf.drain()

    def test_error_propagates_with_batch(self, setup):
        g, plan, book, owner, shard, client = setup

        class Boom:
            def sync_pull(self, ids, account=None):
                raise ConnectionError("injected")

        pf = Prefetcher(plan, 0, owner, 0, shard, Boom(), None, None, depth=2)
        with pytest.raises(PrefetchError) as exc:
            while pf.next_bundle() is not None:
                pass
        assert exc.value.batch == 0
        pf.drain()

    def test_drain_idempotent_and_unblocks_producer(self, setup):
        g, plan, book, owner, shard, client = setup
        pf = Prefetcher(plan, 0, owner, 0, shard, client, None, None, depth=1)
        pf.next_bundle()
        pf.drain()
        pf.drain()
        assert pf.next_bundle() is None

    def test_bad_depth(self, setup):
        g, plan, book, owner, shard, client = setup
        with pytest.raises(ValueError):
            Prefetcher(plan, 0, owner, 0, shard, client, None, None, depth=0)
