# -*- encoding: utf-8 -*-

import numpy as np
import pytest
from pytest import approx

from gflbs.flows import flow_network, max_flow, tv_prox, tv_value
from gflbs.weights import build_neighborhood

from .oracles import enumerate_min_cut, gfl_dual, minimal_source_side, tv1d


def test_max_flow_bottleneck():
    cut = max_flow(flow_network(1, [3.0], [1.0]))
    assert cut.flow_value == approx(1.0)
    assert list(cut.source_side) == [True]


def test_max_flow_isolated_node():
    cut = max_flow(flow_network(2, [0.0, 2.0], [0.0, 0.0], [1], [0], [0.0]))
    assert cut.flow_value == 0.0
    assert list(cut.source_side) == [False, True]


def test_max_flow_chain():
    # s -> 0 -> 1 -> 2 -> t with a bottleneck on the middle arc.
    net = flow_network(3, [5.0, 0.0, 0.0], [0.0, 0.0, 5.0], [0, 1], [1, 2], [2.0, 4.0])
    cut = max_flow(net)
    assert cut.flow_value == approx(2.0)
    assert list(cut.source_side) == [True, False, False]


def random_network(rng, n):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = rng.random(len(pairs)) < min(1.0, 3.0 / n)
    tails = np.array([p[0] for p, c in zip(pairs, chosen) if c], dtype=np.intp)
    heads = np.array([p[1] for p, c in zip(pairs, chosen) if c], dtype=np.intp)
    k = len(tails)
    return flow_network(
        n,
        rng.random(n) * (rng.random(n) < 0.6),
        rng.random(n) * (rng.random(n) < 0.6),
        tails,
        heads,
        rng.random(k),
        rng.random(k) * (rng.random(k) < 0.7),
    )


def test_max_flow_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(100):
        net = random_network(rng, int(rng.integers(1, 15)))
        cut = max_flow(net)
        expected = enumerate_min_cut(net)
        assert cut.flow_value == approx(expected, abs=1e-9)
        assert net.cut_capacity(cut.source_side) == approx(expected, abs=1e-9)


def test_max_flow_minimal_source_side():
    # Integer capacities keep every residual exact, ties included.
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(1, 11))
        net = random_network(rng, n)
        net = flow_network(
            n,
            np.round(3 * net.source_caps),
            np.round(3 * net.sink_caps),
            net.tails,
            net.heads,
            np.round(3 * net.capacities),
            np.round(3 * net.reverse_capacities),
        )
        cut = max_flow(net)
        assert list(cut.source_side) == list(minimal_source_side(net))


def test_max_flow_empty_network():
    cut = max_flow(flow_network(0, [], []))
    assert cut.flow_value == 0.0 and len(cut.source_side) == 0


def test_max_flow_grid_networks():
    rng = np.random.default_rng(1)
    graph = build_neighborhood(4, 4)
    for _ in range(10):
        net = flow_network(
            16,
            rng.random(16) * (rng.random(16) < 0.5),
            rng.random(16) * (rng.random(16) < 0.5),
            graph.edges[:, 0],
            graph.edges[:, 1],
            rng.random(len(graph)),
            rng.random(len(graph)),
        )
        assert max_flow(net).flow_value == approx(enumerate_min_cut(net), abs=1e-9)


def test_flow_network_errors():
    with pytest.raises(ValueError):
        flow_network(2, [1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        flow_network(2, [1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        flow_network(2, [1.0, 1.0], [1.0, 1.0], [0], [0], [1.0])
    with pytest.raises(ValueError):
        flow_network(2, [1.0, 1.0], [1.0, 1.0], [0], [2], [1.0])
    with pytest.raises(ValueError):
        flow_network(2, [1.0, 1.0], [1.0, 1.0], [0, 1], [1, 0], [1.0, 1.0])
    with pytest.raises(ValueError):
        flow_network(1, [np.inf], [1.0])


def test_tv_prox_two_nodes():
    edges = [[0, 1]]
    assert tv_prox([0.0, 4.0], edges, [1.0], 1.0) == approx([1.0, 3.0])
    assert tv_prox([1.0, 2.0], edges, [1.0], 1.0) == approx([1.5, 1.5])
    m = np.array([0.3, -2.0])
    assert np.array_equal(tv_prox(m, edges, [1.0], 0.0), m)


def test_tv_prox_zero_weights():
    m = np.array([0.1, 0.9, -0.4])
    out = tv_prox(m, [[0, 1], [1, 2]], [0.0, 0.0], 5.0)
    assert np.array_equal(out, m)


def test_tv_prox_errors():
    with pytest.raises(ValueError):
        tv_prox([0.0, 1.0], [[0, 1]], [1.0], -1.0)
    with pytest.raises(ValueError):
        tv_prox([0.0, 1.0], [[0, 1]], [-1.0], 1.0)
    with pytest.raises(ValueError):
        tv_prox([0.0, 1.0], [[0, 1]], [1.0, 1.0], 1.0)


def test_tv_prox_chain_matches_exact_1d():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(2, 201))
        m = rng.normal(size=n) + np.repeat(rng.normal(size=4), -(-n // 4))[:n]
        lam = float(rng.uniform(0.01, 2.0))
        edges = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        out = tv_prox(m, edges, np.ones(n - 1), lam)
        assert out == approx(tv1d(m, lam), abs=1e-8)


def test_tv_prox_grid_matches_dual():
    rng = np.random.default_rng(3)
    for _ in range(200):
        width, height = (int(v) for v in rng.integers(1, 6, 2))
        graph = build_neighborhood(width, height)
        m = rng.uniform(-1, 1, graph.node_count)
        w = rng.random(len(graph))
        lam2 = float(rng.uniform(0, 0.5))
        out = tv_prox(m, graph.edges, w, lam2)
        assert out == approx(gfl_dual(m, graph.edges, w, 0.0, lam2), abs=1e-5)

        # Edge subgradients cancel pairwise.
        assert out.sum() == approx(m.sum(), abs=1e-6)
        for a1, a2 in ((-0.5, 0.0), (0.0, 0.25), (-1.0, 1.0)):
            assert np.all((out >= a1) | ~(out >= a2))


def test_tv_value_nonincreasing_in_penalty():
    rng = np.random.default_rng(4)
    graph = build_neighborhood(5, 4)
    m = rng.uniform(-1, 1, graph.node_count)
    w = rng.random(len(graph))
    values = [
        tv_value(tv_prox(m, graph.edges, w, lam2), graph.edges, w)
        for lam2 in np.linspace(0.0, 1.0, 11)
    ]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))
    assert values[0] == approx(tv_value(m, graph.edges, w))


def test_tv_prox_large_penalty_fuses():
    rng = np.random.default_rng(5)
    graph = build_neighborhood(4, 4)
    m = rng.uniform(-1, 1, graph.node_count)
    out = tv_prox(m, graph.edges, np.ones(len(graph)), 100.0)
    assert out == approx(np.full(16, m.mean()), abs=1e-9)
