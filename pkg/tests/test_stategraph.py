from __future__ import annotations

import numpy as np
import pytest

from tidyplan.collision import resolve_collisions
from tidyplan.gridworld import ScenarioConfig, WorldState, generate_scenario
from tidyplan.nav import Navigator
from tidyplan.perception import init_knowledge
from tidyplan.stategraph import (
    AGENT,
    GOAL,
    NODE_DIM,
    SOURCE,
    GcnWeights,
    GraphError,
    MissingCacheError,
    batch_graphs,
    build_graph,
    edge_list,
    gcn_backward,
    gcn_forward,
    make_graph,
)


def manhattan(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def toy_graph(n, seed=0, ids=None, w=12, h=9):
    rng = np.random.default_rng(seed)
    ids = ids or [f"o{k}" for k in range(n)]
    labels = [f"kitchen|table|{k % 3}" for k in range(n)]
    cells = lambda: [(int(rng.integers(w)), int(rng.integers(h))) for _ in range(n)]  # noqa: E731
    return make_graph(ids, labels, cells(), cells(), (0, 0), manhattan, w, h)


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)))


# -- structure


def test_edge_and_node_counts_for_n_up_to_40():
    for n in range(1, 41):
        g = toy_graph(n, seed=n)
        assert len(g.edges) == n * n + n
        assert g.n_nodes == 2 * n + 1
        assert [nd.kind for nd in g.nodes].count(AGENT) == 1


def test_edge_rules_exact():
    for n in (1, 2, 5):
        got = {tuple(e) for e in edge_list(n)}
        want = {(0, 1 + k) for k in range(n)} | {(1 + k, 1 + n + k) for k in range(n)}
        want |= {(1 + n + i, 1 + j) for i in range(n) for j in range(n) if i != j}
        assert got == want and len(got) == len(edge_list(n))


def test_small_counts():
    assert (toy_graph(1).n_nodes, len(toy_graph(1).edges)) == (3, 2)
    assert (toy_graph(2).n_nodes, len(toy_graph(2).edges)) == (5, 6)


def test_costs_come_from_the_cost_function_and_sentinel_for_unreachable():
    g = make_graph(["a"], ["x"], [(3, 0)], [(3, 4)], (0, 0), lambda a, b: -1 if b == (3, 4) else manhattan(a, b), 6, 5)
    assert g.costs.tolist() == [3.0, 30.0]


def test_misaligned_inputs_rejected():
    with pytest.raises(GraphError):
        make_graph(["a", "b"], ["x"], [(0, 0)], [(1, 1)], (0, 0), manhattan, 4, 4)


def test_action_features_layout():
    g = toy_graph(3, seed=2)
    f = g.action_features() * (g.width + g.height)
    for k in range(3):
        src, goal = g.source(k), g.goal(k)
        assert f[k, 0] == manhattan(g.nodes[0].position, g.nodes[src].position)
        assert f[k, 1] == manhattan(g.nodes[src].position, g.nodes[goal].position)
        onward = [manhattan(g.nodes[goal].position, g.nodes[g.source(j)].position) for j in range(3) if j != k]
        assert f[k, 2] == min(onward) and f[k, 3] == pytest.approx(np.mean(onward))


def test_blocked_goal_node_sits_next_to_source():
    for seed in range(5):
        s = generate_scenario(ScenarioConfig(n_objects=6, n_blocked=1), seed)
        state = WorldState.from_scenario(s)
        k = init_knowledge(s, state)
        resolve_collisions(k)
        blocked = next(o.id for o in s.objects if o.case == "blocked")
        g = build_graph(k, state.agent, state.nav, s.grid.width, s.grid.height)
        i = g.object_ids.index(blocked)
        assert g.costs[g.n_objects + i] <= 1


# -- encoder


def test_zero_weights_give_zero_embeddings():
    z, _ = gcn_forward(batch_graphs([toy_graph(4)]), GcnWeights(zero=True))
    assert z.shape == (9, 32) and not z.any()


def test_single_node_graph_uses_self_transform_only():
    g = make_graph([], [], [], [], (2, 3), manhattan, 8, 8)
    w = GcnWeights(rng=np.random.default_rng(0))
    z, _ = gcn_forward(batch_graphs([g]), w)
    h = g.features
    for i in range(w.layers):
        Ws, b, _, _ = w.layer(i)
        h = np.maximum(h @ Ws + b, 0)
    np.testing.assert_allclose(z, h, atol=1e-12)


def test_shape_mismatch_rejected():
    with pytest.raises(GraphError):
        gcn_forward(batch_graphs([toy_graph(2)]), GcnWeights(in_dim=NODE_DIM + 1, rng=np.random.default_rng(0)))


def test_backward_needs_cache():
    with pytest.raises(MissingCacheError):
        gcn_backward(batch_graphs([toy_graph(2)]), GcnWeights(), [], np.zeros((5, 32)))


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    w = GcnWeights(rng=rng)
    ids = ["a", "b", "c", "d"]
    labels = ["kitchen|bowl", "bath|towel", "bed|pillow", "living|remote"]
    src = [(1, 2), (5, 5), (7, 1), (3, 6)]
    goal = [(2, 7), (6, 0), (0, 4), (8, 3)]
    g = make_graph(ids, labels, src, goal, (4, 4), manhattan, 10, 8)
    perm = [2, 0, 3, 1]
    gp = make_graph([ids[p] for p in perm], [labels[p] for p in perm], [src[p] for p in perm], [goal[p] for p in perm], (4, 4), manhattan, 10, 8)
    z, _ = gcn_forward(batch_graphs([g]), w)
    zp, _ = gcn_forward(batch_graphs([gp]), w)
    np.testing.assert_allclose(zp[0], z[0], atol=1e-12)
    for new, old in enumerate(perm):
        np.testing.assert_allclose(zp[g.source(new)], z[g.source(old)], atol=1e-12)
        np.testing.assert_allclose(zp[g.goal(new)], z[g.goal(old)], atol=1e-12)


def test_scene_invariance_across_floorplans():
    open_map = np.ones((10, 10), dtype=bool)
    other = open_map.copy()
    other[7:, 7:] = False  # a far corner no path between the nodes needs
    args = (["a", "b"], ["x|y", "y|z"], [(1, 1), (3, 0)], [(0, 3), (2, 2)], (0, 0))
    g1 = make_graph(*args, Navigator(open_map).length, 10, 10)
    g2 = make_graph(*args, Navigator(other).length, 10, 10)
    np.testing.assert_array_equal(g1.costs, g2.costs)
    w = GcnWeights(rng=np.random.default_rng(1))
    np.testing.assert_array_equal(gcn_forward(batch_graphs([g1]), w)[0], gcn_forward(batch_graphs([g2]), w)[0])


def test_batching_matches_one_at_a_time():
    w = GcnWeights(rng=np.random.default_rng(5))
    gs = [toy_graph(n, seed=n) for n in (1, 3, 0, 4)]
    z, _ = gcn_forward(batch_graphs(gs), w)
    b = batch_graphs(gs)
    for k, g in enumerate(gs):
        zk, _ = gcn_forward(batch_graphs([g]), w)
        np.testing.assert_allclose(z[b.offsets[k] : b.offsets[k + 1]], zk, atol=1e-12)


def test_mean_aggregation_against_dense_loop():
    g = toy_graph(3, seed=7)
    w = GcnWeights(layers=1, rng=np.random.default_rng(2))
    Ws, b, Wn, we = w.layer(0)
    h = g.features
    c = g.costs / (g.width + g.height)
    want = np.zeros((g.n_nodes, w.hidden))
    for v in range(g.n_nodes):
        inc = [e for e, (a, d) in enumerate(g.edges) if d == v]
        agg = np.mean([h[g.edges[e][0]] @ Wn + c[e] * we for e in inc], axis=0) if inc else 0
        want[v] = np.maximum(h[v] @ Ws + b + agg, 0)
    z, _ = gcn_forward(batch_graphs([g]), w)
    np.testing.assert_allclose(z, want, atol=1e-12)


def test_gradients_match_finite_differences():
    batch = batch_graphs([toy_graph(3, seed=11)])
    w = GcnWeights(rng=np.random.default_rng(4))
    for p in w.params:
        p += np.random.default_rng(9).normal(0, 0.1, p.shape)
    up = np.random.default_rng(6).normal(size=(batch.features.shape[0], w.hidden))
    loss = lambda: float(np.sum(up * gcn_forward(batch, w)[0]))  # noqa: E731
    _, cache = gcn_forward(batch, w)
    grads, _ = gcn_backward(batch, w, cache, up)
    h = 1e-4
    for p, g in zip(w.params, grads):
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            lp = loss()
            p[idx] = old - h
            lm = loss()
            p[idx] = old
            num[idx] = (lp - lm) / (2 * h)
        assert rel_err(g, num) <= 1e-4


def test_backward_is_linear_in_upstream():
    batch = batch_graphs([toy_graph(3, seed=1)])
    w = GcnWeights(rng=np.random.default_rng(0))
    _, cache = gcn_forward(batch, w)
    up = np.random.default_rng(1).normal(size=(7, 32))
    g1, _ = gcn_backward(batch, w, cache, up)
    g2, _ = gcn_backward(batch, w, cache, 2 * up)
    g0, _ = gcn_backward(batch, w, cache, 0 * up)
    for a, b, c in zip(g1, g2, g0):
        np.testing.assert_allclose(b, 2 * a, atol=1e-12)
        assert not c.any()


def test_node_kind_one_hot():
    g = toy_graph(2)
    kinds = g.features[:, 2:5].argmax(axis=1)
    assert kinds.tolist() == [AGENT, SOURCE, SOURCE, GOAL, GOAL]
    assert np.all(g.features[:, 2:5].sum(axis=1) == 1)
