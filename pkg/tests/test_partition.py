import itertools

import numpy as np
import pytest

from gnnpipe.graph import from_edge_list, synth_powerlaw
from gnnpipe.partition import (edge_cut, halo_expand, load_partition,
                               partition_edgecut, partition_random,
                               save_partition)
from conftest import two_cliques


def test_random_k1(small_graph):
    book = halo_expand(small_graph, partition_random(small_graph, 1, 7))
    assert (book.owner == 0).all()
    assert len(book.halo[0]) == 0


def test_random_deterministic(small_graph):
    a = partition_random(small_graph, 3, 42)
    b = partition_random(small_graph, 3, 42)
    assert np.array_equal(a.owner, b.owner)


def test_random_balance():
    g = synth_powerlaw(10000, 5, 4, 2, 7)
    book = partition_random(g, 2, 7)
    counts = np.bincount(book.owner, minlength=2)
    assert abs(counts[0] - 5000) <= 300
    assert abs(counts[1] - 5000) <= 300


def test_k_zero_rejected(small_graph):
    with pytest.raises(ValueError):
        partition_random(small_graph, 0, 7)
    with pytest.raises(ValueError):
        partition_edgecut(small_graph, 0)


def test_edgecut_k1(small_graph):
    book = partition_edgecut(small_graph, 1)
    assert edge_cut(small_graph, book.owner) == 0


def test_edgecut_two_cliques_optimal():
    g = two_cliques(6)
    book = partition_edgecut(g, 2)
    assert edge_cut(g, book.owner) == 0
    # brute force: zero really is the optimum for a balanced split
    best = min(
        edge_cut(g, np.array(assign))
        for assign in itertools.product([0, 1], repeat=g.num_nodes)
        if sum(assign) == g.num_nodes // 2
    )
    assert best == 0


def test_edgecut_beats_random_planted():
    # planted 2-community graph: dense inside, sparse across
    rng = np.random.Generator(np.random.Philox(3))
    n = 200
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            same = (a < n // 2) == (b < n // 2)
            p = 0.10 if same else 0.01
            if rng.random() < p:
                edges.append((a, b))
    g = from_edge_list(n, edges)
    cut_greedy = edge_cut(g, partition_edgecut(g, 2).owner)
    cut_rand = edge_cut(g, partition_random(g, 2, 7).owner)
    assert cut_greedy < cut_rand


def test_edgecut_beats_random_powerlaw():
    g = synth_powerlaw(10000, 5, 4, 2, 7)
    cut_greedy = edge_cut(g, partition_edgecut(g, 2).owner)
    cut_rand = edge_cut(g, partition_random(g, 2, 7).owner)
    assert cut_greedy < cut_rand


def test_edgecut_capacity(small_graph):
    for k in (2, 3, 7):
        book = partition_edgecut(small_graph, k)
        cap = int(np.ceil(1.05 * small_graph.num_nodes / k))
        assert np.bincount(book.owner, minlength=k).max() <= cap


def test_edgecut_deterministic(small_graph):
    a = partition_edgecut(small_graph, 4)
    b = partition_edgecut(small_graph, 4)
    assert np.array_equal(a.owner, b.owner)


def test_halo_path_graph(path_graph):
    book = partition_random(path_graph, 2, 0)
    book.owner = np.array([0, 0, 1])
    book = halo_expand(path_graph, book)
    assert book.halo[0].tolist() == [2]
    assert book.halo[1].tolist() == [1]


def test_halo_sound_and_complete(small_graph):
    g = small_graph
    book = halo_expand(g, partition_random(g, 3, 5))
    for p in range(book.k):
        halo = set(book.halo[p].tolist())
        expected = set()
        for v in range(g.num_nodes):
            if book.owner[v] != p:
                continue
            for u in g.neighbors(v):
                if book.owner[u] != p:
                    expected.add(int(u))
        assert halo == expected


def test_rpb_roundtrip(tmp_path, small_graph):
    book = partition_edgecut(small_graph, 3)
    p = tmp_path / "b.rpb"
    save_partition(book, p)
    loaded = load_partition(p)
    assert loaded.k == 3
    assert np.array_equal(loaded.owner, book.owner)


def test_rpb_bad_magic(tmp_path, small_graph):
    p = tmp_path / "b.rpb"
    save_partition(partition_random(small_graph, 2, 1), p)
    data = bytearray(p.read_bytes())
    data[:4] = b"NOPE"
    p.write_bytes(bytes(data))
    with pytest.raises(ValueError):
        load_partition(p)
