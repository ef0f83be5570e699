"""Conservative Q-learning over the state graph, plus the baseline choosers.

The Q-head scores each object in the graph from its source and goal node
embeddings, the agent embedding, the graph mean embedding and four raw
path-cost features. Only graph objects that are not temporarily static are
valid actions.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .checkpoint import load_checkpoint, save_checkpoint
from .nn import MLP, Adam, clip_by_global_norm
from .stategraph import NODE_DIM, DirectedStateGraph, GcnWeights, batch_graphs, gcn_backward, gcn_forward

N_EDGE_FEATURES = 4


class PlannerError(RuntimeError):
    pass


class EmptyValidSetError(PlannerError):
    pass


class BufferUnderfullError(PlannerError):
    pass


@dataclass
class RlConfig:
    gamma: float = 0.95
    alpha: float = 1.0
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5
    tau: float = 0.005
    lr: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 50_000
    total_steps: int = 30_000
    static_penalty: float = -5.0
    completion_reward: float = 100.0
    gcn_hidden: int = 32
    gcn_layers: int = 2
    head_hidden: int = 64
    value_scale: float = 10.0
    grad_clip: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "RlConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown rl settings: {sorted(unknown)}")
        return cls(**d)

    def epsilon(self, step: int) -> float:
        span = max(1, int(self.eps_fraction * self.total_steps))
        frac = min(1.0, step / span)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


# ---------------------------------------------------------------------------
# Q model


@dataclass
class HeadInputs:
    batch: object
    src: np.ndarray
    goal: np.ndarray
    agent: np.ndarray
    owner: np.ndarray  # graph index of each action row
    edge_feats: np.ndarray
    offsets: np.ndarray  # action rows of graph g are offsets[g]:offsets[g+1]
    owner_sum: sp.csr_matrix  # (G, A): sums action rows per graph


def head_inputs(graphs: Sequence[DirectedStateGraph]) -> HeadInputs:
    batch = batch_graphs(graphs)
    n_obj = np.array([g.n_objects for g in graphs], dtype=int)
    offs = np.concatenate([[0], np.cumsum(n_obj)]).astype(int)
    owner = np.repeat(np.arange(len(graphs)), n_obj)
    base = np.repeat(batch.offsets[:-1], n_obj)
    k = np.arange(offs[-1]) - offs[owner]
    n_rep = n_obj[owner]
    feats = np.vstack([g.action_features() for g in graphs]) if offs[-1] else np.zeros((0, N_EDGE_FEATURES))
    order = np.argsort(owner, kind="stable")
    indptr = np.concatenate([[0], np.cumsum(n_obj)])
    owner_sum = sp.csr_matrix((np.ones(len(owner)), order, indptr), shape=(len(graphs), len(owner)))
    return HeadInputs(batch, base + 1 + k, base + 1 + n_rep + k, base, owner, feats, offs, owner_sum)


class QModel:
    def __init__(self, config: RlConfig = RlConfig(), rng: np.random.Generator | None = None, zero: bool = False):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        h = config.gcn_hidden
        self.gcn = GcnWeights(NODE_DIM, h, config.gcn_layers, rng, zero=zero)
        self.head = MLP([4 * h + N_EDGE_FEATURES, config.head_hidden, 1], rng, zero=zero)
        self.target_gcn = copy.deepcopy(self.gcn)
        self.target_head = copy.deepcopy(self.head)
        self.step = 0

    @property
    def params(self) -> list[np.ndarray]:
        return self.gcn.params + self.head.params

    @property
    def target_params(self) -> list[np.ndarray]:
        return self.target_gcn.params + self.target_head.params

    def forward(self, inputs: HeadInputs, target: bool = False):
        """Q for every action row of the batch, and a cache for :meth:`backward`."""
        gcn, head = (self.target_gcn, self.target_head) if target else (self.gcn, self.head)
        z, gcache = gcn_forward(inputs.batch, gcn)
        pooled = inputs.batch.pool @ z
        x = np.hstack([z[inputs.src], z[inputs.goal], z[inputs.agent], pooled[inputs.owner], inputs.edge_feats])
        out, hcache = head.forward(x)
        return self.config.value_scale * out[:, 0], (inputs, z.shape, gcache, hcache)

    def backward(self, cache, dq: np.ndarray) -> list[np.ndarray]:
        """Gradients of sum(dq * Q) for :attr:`params` (same order)."""
        inputs, zshape, gcache, hcache = cache
        hgrads, dx = self.head.backward(hcache, (self.config.value_scale * dq)[:, None])
        h = zshape[1]
        dz = np.zeros(zshape)
        np.add.at(dz, inputs.src, dx[:, :h])
        np.add.at(dz, inputs.goal, dx[:, h : 2 * h])
        np.add.at(dz, inputs.agent, dx[:, 2 * h : 3 * h])
        dz += inputs.batch.pool.T @ (inputs.owner_sum @ dx[:, 3 * h : 4 * h])
        ggrads, _ = gcn_backward(inputs.batch, self.gcn, gcache, dz)
        return ggrads + hgrads

    def q_values(self, graph: DirectedStateGraph) -> dict[str, float]:
        if graph.n_objects == 0:
            return {}
        q, _ = self.forward(head_inputs([graph]))
        return {oid: float(v) for oid, v in zip(graph.object_ids, q)}

    def polyak(self, tau: float | None = None) -> None:
        tau = self.config.tau if tau is None else tau
        for t, p in zip(self.target_params, self.params):
            t *= 1 - tau
            t += tau * p

    # -- persistence

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        tensors = {}
        for prefix, ps in (("online", self.params), ("target", self.target_params)):
            for i, p in enumerate(ps):
                tensors[f"{prefix}.{i}"] = p
        save_checkpoint(path, "planner", tensors, {"config": asdict(self.config), **(meta or {})}, self.step)

    @classmethod
    def load(cls, path: str | Path) -> "QModel":
        _, tensors, meta, step = load_checkpoint(path, "planner")
        model = cls(RlConfig.from_dict(meta["config"]), zero=True)
        for prefix, ps in (("online", model.params), ("target", model.target_params)):
            for i, p in enumerate(ps):
                src = tensors[f"{prefix}.{i}"]
                if src.shape != p.shape:
                    raise PlannerError(f"checkpoint tensor {prefix}.{i} has shape {src.shape}, expected {p.shape}")
                p[...] = src
        model.step = step
        return model


# ---------------------------------------------------------------------------
# acting and rewards


def select_action(q: dict[str, float], valid: Sequence[str], epsilon: float, rng: np.random.Generator) -> str:
    """Epsilon-greedy over ``valid``; greedy ties go to the lowest id."""
    valid = sorted(valid)
    if not valid:
        raise EmptyValidSetError("no valid action left")
    if epsilon > 0 and rng.random() < epsilon:
        return valid[int(rng.integers(len(valid)))]
    best = max(q[oid] for oid in valid)
    return next(oid for oid in valid if q[oid] == best)


def reward(misplaced: bool, traversal: int, completed: bool, config: RlConfig = RlConfig()) -> float:
    """Negative traversal for a real rearrangement, a fixed penalty otherwise, plus a completion bonus."""
    r = -float(traversal) if misplaced else config.static_penalty
    if completed:
        r += config.completion_reward
    return r


# ---------------------------------------------------------------------------
# learning


@dataclass
class Transition:
    state: DirectedStateGraph
    action: int  # index into state.object_ids
    reward: float
    next_state: DirectedStateGraph
    next_valid: np.ndarray  # bool mask over next_state.object_ids
    terminal: bool
    valid: np.ndarray | None = None  # bool mask over state.object_ids; None means all


class ReplayBuffer:
    def __init__(self, capacity: int = 50_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.items: list[Transition] = []
        self.pos = 0

    def __len__(self) -> int:
        return len(self.items)

    def add(self, t: Transition) -> None:
        if len(self.items) < self.capacity:
            self.items.append(t)
        else:
            self.items[self.pos] = t
        self.pos = (self.pos + 1) % self.capacity

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if len(self.items) < n:
            raise BufferUnderfullError(f"buffer holds {len(self.items)} transitions, need {n}")
        return [self.items[i] for i in rng.integers(len(self.items), size=n)]


def td_loss_from_values(r, gamma: float, terminal, max_next_q, q_sa) -> float:
    r, terminal, max_next_q, q_sa = (np.asarray(v, dtype=float) for v in (r, terminal, max_next_q, q_sa))
    target = r + gamma * (1.0 - terminal) * max_next_q
    return float(0.5 * np.mean((target - q_sa) ** 2))


def cql_loss_from_values(q_policy, q_data, td: float, alpha: float) -> float:
    return float(alpha * (np.mean(q_policy) - np.mean(q_data)) + td)


def _segment_argmax(values: np.ndarray, offsets: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Row index of the max per segment (first on ties, i.e. lowest id); -1 for empty segments."""
    out = np.full(len(offsets) - 1, -1)
    for g in range(len(offsets) - 1):
        a, b = offsets[g], offsets[g + 1]
        seg = values[a:b] if mask is None else np.where(mask[a:b], values[a:b], -np.inf)
        if b > a and np.isfinite(seg).any():
            out[g] = a + int(np.argmax(seg))
    return out


@dataclass
class BatchLoss:
    td: float
    cql: float
    grads: list[np.ndarray] | None = None


def batch_loss(model: QModel, batch: Sequence[Transition], gamma: float, alpha: float, with_grads: bool = True) -> BatchLoss:
    """TD loss against the target network and the conservative loss, with gradients for the online params.

    The conservative term compares Q at the greedy valid action with Q at the
    stored action; the greedy index is held fixed when differentiating.
    """
    if not batch:
        raise PlannerError("empty batch")
    b = len(batch)
    cur = head_inputs([t.state for t in batch])
    q, cache = model.forward(cur)
    data_rows = np.array([cur.offsets[k] + t.action for k, t in enumerate(batch)])
    valid_cur = np.concatenate([np.ones(t.state.n_objects, bool) if t.valid is None else t.valid for t in batch]).astype(bool)
    pol_rows = _segment_argmax(q, cur.offsets, valid_cur)

    nxt = head_inputs([t.next_state for t in batch])
    qn, _ = model.forward(nxt, target=True)
    mask = np.concatenate([t.next_valid for t in batch]).astype(bool) if len(qn) else np.zeros(0, bool)
    nrows = _segment_argmax(qn, nxt.offsets, mask)
    max_next = np.where(nrows >= 0, qn[np.maximum(nrows, 0)] if len(qn) else 0.0, 0.0)
    # a next state without valid actions ends the episode
    terminal = np.array([1.0 if (t.terminal or row < 0) else 0.0 for t, row in zip(batch, nrows)])
    rewards = np.array([t.reward for t in batch])

    q_sa = q[data_rows]
    td = td_loss_from_values(rewards, gamma, terminal, max_next, q_sa)
    cql = cql_loss_from_values(q[pol_rows], q_sa, td, alpha)
    if not with_grads:
        return BatchLoss(td, cql)
    target = rewards + gamma * (1 - terminal) * max_next
    dq = np.zeros(len(q))
    np.add.at(dq, data_rows, -(target - q_sa) / b - alpha / b)
    np.add.at(dq, pol_rows, alpha / b)
    return BatchLoss(td, cql, model.backward(cache, dq))


def td_loss(model: QModel, batch: Sequence[Transition], gamma: float) -> float:
    return batch_loss(model, batch, gamma, 0.0, with_grads=False).td


def cql_loss(model: QModel, batch: Sequence[Transition], alpha: float, gamma: float) -> float:
    return batch_loss(model, batch, gamma, alpha, with_grads=False).cql


class Learner:
    """Owns the optimizer state for one model."""

    def __init__(self, model: QModel):
        self.model = model
        self.opt = Adam(model.params, lr=model.config.lr)

    def train_step(self, buffer: ReplayBuffer, rng: np.random.Generator) -> BatchLoss:
        cfg = self.model.config
        batch = buffer.sample(cfg.batch_size, rng)
        out = batch_loss(self.model, batch, cfg.gamma, cfg.alpha)
        if cfg.grad_clip > 0:
            clip_by_global_norm(out.grads, cfg.grad_clip)
        self.opt.step(self.model.params, out.grads)
        self.model.polyak()
        self.model.step += 1
        return out


def train_step(model: QModel, buffer: ReplayBuffer, config: RlConfig, rng: np.random.Generator, learner: Learner | None = None) -> BatchLoss:
    if len(buffer) < config.batch_size:
        raise BufferUnderfullError(f"buffer holds {len(buffer)} transitions, need {config.batch_size}")
    learner = learner or Learner(model)
    return learner.train_step(buffer, rng)


# ---------------------------------------------------------------------------
# baseline choosers


def heuristic_action(knowledge, agent, navigator, valid: Sequence[str]) -> str:
    """Valid object with the shortest walk to it plus carry to its (resolved) goal; ties to the lowest id."""
    if not valid:
        raise EmptyValidSetError("no valid action left")
    big = 10**9

    def cost(oid: str) -> int:
        pos = knowledge.position(oid)
        a = navigator.length(agent, pos)
        b = navigator.length(pos, knowledge.goal_for(oid))
        return big if a < 0 or b < 0 else a + b

    return min(sorted(valid), key=cost)


def next_frontier(sensed: np.ndarray, free: np.ndarray, agent, navigator) -> tuple[int, int] | None:
    """Nearest reachable free cell not yet sensed (ties by row, then column), or None when covered."""
    field = navigator.field(tuple(agent))
    dist = np.where(free & ~sensed & (field.dist >= 0), field.dist, -1)
    if (dist < 0).all():
        return None
    d = dist[dist >= 0].min()
    ys, xs = np.nonzero(dist == d)
    k = int(np.lexsort((xs, ys))[0])
    return (int(xs[k]), int(ys[k]))
