"""Directed state graph over agent/source/goal nodes and a small graph convolution encoder.

Node order in a graph with N objects is: agent (0), sources (1..N), goals
(N+1..2N), objects sorted by id. Edges run agent->every source,
source_i->goal_i, and goal_i->source_j for i != j, each carrying the
shortest-path length in cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .geometry import Cell
from .nn import relu
from .uodm import embed_label

AGENT, SOURCE, GOAL = 0, 1, 2
LABEL_DIM = 16
NODE_DIM = 2 + 3 + LABEL_DIM + 1


class GraphError(ValueError):
    pass


class MissingCacheError(RuntimeError):
    pass


@dataclass(frozen=True)
class DsgNode:
    kind: int
    object_id: str | None
    position: Cell
    label_feature: np.ndarray = field(repr=False, compare=False)


@dataclass
class DirectedStateGraph:
    nodes: list[DsgNode]
    edges: np.ndarray  # (E, 2) int, (from, to)
    costs: np.ndarray  # (E,) path length in cells
    width: int
    height: int
    object_ids: tuple[str, ...]
    features: np.ndarray = field(repr=False)

    @property
    def n_objects(self) -> int:
        return len(self.object_ids)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def source(self, k: int) -> int:
        return 1 + k

    def goal(self, k: int) -> int:
        return 1 + self.n_objects + k

    def action_features(self) -> np.ndarray:
        """Per object: cost agent->source, source->goal, and min/mean goal->other source, scaled by W+H."""
        cached = self.__dict__.get("_action_features")
        if cached is None:
            cached = self.__dict__["_action_features"] = self._action_features()
        return cached

    def _action_features(self) -> np.ndarray:
        n = self.n_objects
        out = np.zeros((n, 4))
        if n == 0:
            return out
        c = self.costs
        # edges are laid out as [agent->src (n)] [src->goal (n)] [goal_i->src_j (n(n-1)), i-major]
        out[:, 0] = c[:n]
        out[:, 1] = c[n : 2 * n]
        if n > 1:
            onward = c[2 * n :].reshape(n, n - 1)
            out[:, 2] = onward.min(axis=1)
            out[:, 3] = onward.mean(axis=1)
        return out / (self.width + self.height)


def edge_list(n: int) -> np.ndarray:
    edges = [(0, 1 + k) for k in range(n)]
    edges += [(1 + k, 1 + n + k) for k in range(n)]
    edges += [(1 + n + i, 1 + j) for i in range(n) for j in range(n) if i != j]
    return np.array(edges, dtype=int).reshape(-1, 2)


def make_graph(
    object_ids: Sequence[str],
    labels: Sequence[str],
    sources: Sequence[Cell],
    goals: Sequence[Cell],
    agent: Cell,
    cost: Callable[[Cell, Cell], int],
    width: int,
    height: int,
) -> DirectedStateGraph:
    """Assemble a graph from explicit node positions; ``cost`` returns -1 when unreachable."""
    n = len(object_ids)
    if not (len(labels) == len(sources) == len(goals) == n):
        raise GraphError("object ids, labels, sources and goals must align")
    zeros = np.zeros(LABEL_DIM)
    label_feats = [embed_label(lbl, LABEL_DIM) for lbl in labels]
    nodes = [DsgNode(AGENT, None, tuple(agent), zeros)]
    nodes += [DsgNode(SOURCE, oid, tuple(p), f) for oid, p, f in zip(object_ids, sources, label_feats)]
    nodes += [DsgNode(GOAL, oid, tuple(p), f) for oid, p, f in zip(object_ids, goals, label_feats)]
    edges = edge_list(n)
    sentinel = float(width * height)
    costs = np.empty(len(edges))
    for e, (a, b) in enumerate(edges):
        d = cost(nodes[a].position, nodes[b].position)
        costs[e] = sentinel if d < 0 else float(d)
    feats = np.zeros((len(nodes), NODE_DIM))
    inc_sum = np.bincount(edges[:, 0], costs, len(nodes)) + np.bincount(edges[:, 1], costs, len(nodes))
    inc_cnt = np.bincount(edges.ravel(), minlength=len(nodes))
    for v, node in enumerate(nodes):
        feats[v, 0] = node.position[0] / width
        feats[v, 1] = node.position[1] / height
        feats[v, 2 + node.kind] = 1.0
        feats[v, 5 : 5 + LABEL_DIM] = node.label_feature
        if inc_cnt[v]:
            feats[v, -1] = inc_sum[v] / inc_cnt[v] / (width + height)
    return DirectedStateGraph(nodes, edges, costs, width, height, tuple(object_ids), feats)


def graph_objects(knowledge) -> list[str]:
    """Objects that still need work: observed misplaced ones and unseen ones with a prediction."""
    out = []
    for oid in sorted(knowledge.goals):
        if oid in knowledge.visible:
            if knowledge.is_misplaced(oid):
                out.append(oid)
        elif oid in knowledge.predicted:
            out.append(oid)
    return out


def build_graph(knowledge, agent: Cell, navigator, width: int, height: int) -> DirectedStateGraph:
    """Graph for the current belief; unseen objects sit at their predicted receptacle, goals use resolved goals."""
    ids = graph_objects(knowledge)
    return make_graph(
        ids,
        [knowledge.goals[o].label for o in ids],
        [knowledge.position(o) for o in ids],
        [knowledge.goal_for(o) for o in ids],
        agent,
        navigator.length,
        width,
        height,
    )


# ---------------------------------------------------------------------------
# batching


@dataclass
class GraphBatch:
    """Disjoint union of several graphs with the sparse operators the encoder needs."""

    features: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    cost: np.ndarray  # scaled by W+H of the owning graph
    node_graph: np.ndarray
    offsets: np.ndarray
    n_graphs: int
    gather: sp.csr_matrix  # (E, n): one-hot of edge source
    mean_in: sp.csr_matrix  # (n, E): 1/indegree on incoming edges
    pool: sp.csr_matrix  # (G, n): per-graph node mean


def _csr_one_per_row(cols: np.ndarray, n_cols: int, data: np.ndarray | None = None) -> sp.csr_matrix:
    n = len(cols)
    data = np.ones(n) if data is None else data
    return sp.csr_matrix((data, cols, np.arange(n + 1)), shape=(n, n_cols))


def _csr_grouped(rows: np.ndarray, n_rows: int, data: np.ndarray) -> sp.csr_matrix:
    """(n_rows, len(rows)) matrix with ``data[k]`` at (rows[k], k)."""
    order = np.argsort(rows, kind="stable")
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n_rows))])
    return sp.csr_matrix((data[order], order, indptr), shape=(n_rows, len(rows)))


def batch_graphs(graphs: Sequence[DirectedStateGraph]) -> GraphBatch:
    sizes = np.array([g.n_nodes for g in graphs], dtype=int)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    n = int(offsets[-1])
    if graphs:
        feats = np.vstack([g.features for g in graphs])
        e_counts = [len(g.edges) for g in graphs]
        shift = np.repeat(offsets[:-1], e_counts)
        edges = np.vstack([g.edges for g in graphs]) if sum(e_counts) else np.zeros((0, 2), int)
        src = edges[:, 0] + shift
        dst = edges[:, 1] + shift
        cost = np.concatenate([g.costs / (g.width + g.height) for g in graphs])
    else:
        feats, src, dst, cost = np.zeros((0, NODE_DIM)), np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    node_graph = np.repeat(np.arange(len(graphs)), sizes)
    indeg = np.bincount(dst, minlength=n).astype(float)
    gather = _csr_one_per_row(src, n)
    mean_in = _csr_grouped(dst, n, 1.0 / indeg[dst]) if len(dst) else sp.csr_matrix((n, 0))
    pool = _csr_grouped(node_graph, len(graphs), 1.0 / sizes[node_graph]) if n else sp.csr_matrix((len(graphs), 0))
    return GraphBatch(feats, src, dst, cost, node_graph, offsets, len(graphs), gather, mean_in, pool)


# ---------------------------------------------------------------------------
# encoder


class GcnWeights:
    """Per layer: self transform W_s, bias b, neighbour transform W_n, edge-cost vector w_e."""

    PER_LAYER = 4

    def __init__(self, in_dim: int = NODE_DIM, hidden: int = 32, layers: int = 2, rng: np.random.Generator | None = None, zero: bool = False):
        self.in_dim, self.hidden, self.layers = in_dim, hidden, layers
        self.params: list[np.ndarray] = []
        d = in_dim
        for _ in range(layers):
            if zero or rng is None:
                self.params += [np.zeros((d, hidden)), np.zeros(hidden), np.zeros((d, hidden)), np.zeros(hidden)]
            else:
                s = np.sqrt(1.0 / d)
                self.params += [
                    rng.normal(0, s, (d, hidden)),
                    np.zeros(hidden),
                    rng.normal(0, s, (d, hidden)),
                    rng.normal(0, 1.0, hidden),
                ]
            d = hidden

    def layer(self, i: int) -> list[np.ndarray]:
        return self.params[self.PER_LAYER * i : self.PER_LAYER * (i + 1)]


def gcn_forward(batch: GraphBatch, weights: GcnWeights):
    """Node embeddings and the cache for :func:`gcn_backward`.

    Each layer computes relu(H W_s + b + mean over in-edges (H_src W_n + c w_e)).
    """
    h = batch.features
    if h.shape[1] != weights.in_dim:
        raise GraphError(f"features have width {h.shape[1]}, weights expect {weights.in_dim}")
    cache = []
    for i in range(weights.layers):
        Ws, b, Wn, we = weights.layer(i)
        m = h @ Wn
        msg = batch.gather @ m + batch.cost[:, None] * we
        z = h @ Ws + b + batch.mean_in @ msg
        cache.append((h, z))
        h = relu(z)
    return h, cache


def gcn_backward(batch: GraphBatch, weights: GcnWeights, cache, d_out: np.ndarray):
    """Gradients for ``weights.params`` (same order) and for the input features."""
    if not cache:
        raise MissingCacheError("gcn_backward needs the cache of a forward pass")
    grads: list[np.ndarray] = [None] * len(weights.params)  # type: ignore[list-item]
    g = d_out
    for i in reversed(range(weights.layers)):
        Ws, b, Wn, we = weights.layer(i)
        h, z = cache[i]
        dz = g * (z > 0)
        dmsg = batch.mean_in.T @ dz
        dm = batch.gather.T @ dmsg
        k = GcnWeights.PER_LAYER * i
        grads[k] = h.T @ dz
        grads[k + 1] = dz.sum(axis=0)
        grads[k + 2] = h.T @ dm
        grads[k + 3] = batch.cost @ dmsg
        g = dz @ Ws.T + dm @ Wn.T
    return grads, g
