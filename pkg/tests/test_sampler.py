import numpy as np
import pytest
from scipy import stats

from gnnpipe.graph import from_edge_list
from gnnpipe.rng import mix64_array
from gnnpipe.sampler import (SeedSchedule, epoch_batches, sample_block,
                             seed_for)


def schedule(s0=0, epochs=10, batches=100):
    return SeedSchedule(s0=s0, epochs=epochs, batches_per_epoch=batches)


class TestSeedFor:
    def test_deterministic(self):
        s = schedule()
        assert seed_for(s, 3, 7) == seed_for(s, 3, 7)

    def test_injective_instance(self):
        s = schedule()
        assert seed_for(s, 0, 0) != seed_for(s, 1, 0)

    def test_unique_over_run(self):
        s = schedule(epochs=100, batches=1000)
        e, i = np.meshgrid(np.arange(100, dtype=np.uint64),
                           np.arange(1000, dtype=np.uint64), indexing="ij")
        seeds = mix64_array((e << np.uint64(32)) | i)
        assert len(np.unique(seeds)) == 100_000

    def test_out_of_range(self):
        s = schedule(epochs=2, batches=3)
        with pytest.raises(IndexError):
            seed_for(s, 2, 0)
        with pytest.raises(IndexError):
            seed_for(s, 0, 3)


class TestEpochBatches:
    def test_ceiling_batch_count(self):
        train = np.arange(153_431)
        s = SeedSchedule(s0=1, epochs=1, batches_per_epoch=154)
        batches = epoch_batches(train, 1000, s, 0)
        assert len(batches) == 154
        assert len(batches[-1]) == 431

    def test_single_batch_is_permutation(self):
        train = np.arange(50)
        s = SeedSchedule(s0=9, epochs=1, batches_per_epoch=1)
        (batch,) = epoch_batches(train, 100, s, 0)
        assert sorted(batch.tolist()) == list(range(50))

    def test_partition_of_train_set(self):
        train = np.arange(100, 400, 3)
        s = SeedSchedule(s0=5, epochs=2, batches_per_epoch=7)
        batches = epoch_batches(train, 16, s, 1)
        merged = np.concatenate(batches)
        assert len(merged) == len(train)
        assert np.array_equal(np.sort(merged), train)

    def test_epochs_differ(self):
        train = np.arange(64)
        s = SeedSchedule(s0=5, epochs=2, batches_per_epoch=4)
        a = np.concatenate(epoch_batches(train, 16, s, 0))
        b = np.concatenate(epoch_batches(train, 16, s, 1))
        assert not np.array_equal(a, b)

    def test_errors(self):
        s = SeedSchedule(s0=0, epochs=1, batches_per_epoch=1)
        with pytest.raises(ValueError):
            epoch_batches(np.empty(0, dtype=np.int64), 10, s, 0)
        with pytest.raises(ValueError):
            epoch_batches(np.arange(5), 0, s, 0)


class TestSampleBlock:
    def test_deterministic(self, small_graph):
        a = sample_block(small_graph, np.arange(10), [3, 5], 99)
        b = sample_block(small_graph, np.arange(10), [3, 5], 99)
        assert np.array_equal(a.input_nodes, b.input_nodes)
        for (s1, d1), (s2, d2) in zip(a.edges, b.edges):
            assert np.array_equal(s1, s2) and np.array_equal(d1, d2)

    def test_full_fanout_is_exact_neighborhood(self, small_graph):
        g = small_graph
        max_deg = int(g.degrees().max())
        seeds = np.array([0, 5, 9])
        block = sample_block(g, seeds, [max_deg, max_deg], 7)
        # BFS oracle for the 2-hop closure
        hop1 = set(seeds.tolist())
        for v in seeds:
            hop1.update(g.neighbors(v).tolist())
        hop2 = set(hop1)
        for v in hop1:
            hop2.update(g.neighbors(v).tolist())
        assert set(block.input_nodes.tolist()) == hop2
        # and every frontier node keeps all its neighbors
        src, dst = block.edges[0]
        for v in seeds:
            got = np.sort(src[dst == v])
            assert np.array_equal(got, np.sort(g.neighbors(v)))

    def test_star_fanout_two(self, star_graph):
        block = sample_block(star_graph, np.array([0]), [2], 17)
        src, dst = block.edges[0]
        assert len(src) == 2
        assert len(set(src.tolist())) == 2
        assert all(1 <= s <= 20 for s in src)

    def test_without_replacement(self, small_graph):
        block = sample_block(small_graph, np.arange(20), [4, 8], 3)
        for src, dst in block.edges:
            pairs = set(zip(src.tolist(), dst.tolist()))
            assert len(pairs) == len(src)

    def test_isolated_seed_retained(self):
        g = from_edge_list(4, [(0, 1)])  # nodes 2, 3 isolated
        block = sample_block(g, np.array([2]), [3], 1)
        assert block.input_nodes.tolist() == [2]
        assert len(block.edges[0][0]) == 0

    def test_node_keyed_streams(self, star_graph):
        # node 0's draw does not depend on who else is in the frontier
        g = from_edge_list(
            22, [(0, i) for i in range(1, 21)] + [(21, 1), (21, 2), (21, 3)]
        )
        a = sample_block(g, np.array([0]), [2], 5)
        b = sample_block(g, np.array([0, 21]), [2], 5)
        sa, da = a.edges[0]
        sb, db = b.edges[0]
        assert np.array_equal(np.sort(sa[da == 0]), np.sort(sb[db == 0]))

    def test_frontiers_nested(self, small_graph):
        block = sample_block(small_graph, np.arange(8), [3, 5], 11)
        for inner, outer in zip(block.frontiers, block.frontiers[1:]):
            assert np.all(np.isin(inner, outer))
        assert np.array_equal(block.input_nodes, np.unique(block.input_nodes))

    def test_errors(self, small_graph):
        with pytest.raises(ValueError):
            sample_block(small_graph, np.array([]), [3], 0)
        with pytest.raises(ValueError):
            sample_block(small_graph, np.array([0]), [], 0)


def test_marginal_uniformity(star_graph):
    """Each leaf of a degree-20 star is picked equally often at fanout 5."""
    counts = np.zeros(20, dtype=np.int64)
    for s in range(10_000):
        block = sample_block(star_graph, np.array([0]), [5], s)
        counts[block.edges[0][0] - 1] += 1
    _, p = stats.chisquare(counts)
    assert p > 0.01


def test_stream_independence(star_graph):
    """Leaf-1 selection under seed s is independent of selection under s+1."""
    table = np.zeros((2, 2), dtype=np.int64)
    sel = []
    for s in range(20_000):
        block = sample_block(star_graph, np.array([0]), [5], s)
        sel.append(1 in block.edges[0][0])
    for a, b in zip(sel, sel[1:]):
        table[int(a), int(b)] += 1
    _, p, _, _ = stats.chi2_contingency(table)
    assert p > 0.01
