"""Online epsilon-greedy rollouts feeding an off-policy conservative Q learner."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .collision import CemParams
from .episode import Episode
from .gridworld import ScenarioConfig, generate_scenario
from .rlplanner import Learner, QModel, ReplayBuffer, RlConfig, Transition, reward, select_action
from .uodm import UodmModel

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("step", "td_loss", "cql_loss", "mean_episode_reward")


def default_training_mix() -> list[ScenarioConfig]:
    """Small scenes covering every case the planner meets: plain, hidden, enclosed, swapped, blocked."""
    return [
        ScenarioConfig(n_objects=3),
        ScenarioConfig(n_objects=4),
        ScenarioConfig(n_objects=4),
        ScenarioConfig(n_objects=5),
        ScenarioConfig(n_objects=6),
        ScenarioConfig(n_objects=5, n_partially_occluded=2),
        ScenarioConfig(n_objects=6, n_fully_occluded=2),
        ScenarioConfig(n_objects=6, n_swap=2),
        ScenarioConfig(n_objects=6, n_blocked=1),
        ScenarioConfig(n_objects=8, n_partially_occluded=2, n_swap=2, n_blocked=1),
    ]


@dataclass
class CurvePoint:
    step: int
    td_loss: float
    cql_loss: float
    mean_episode_reward: float


def train_planner(
    config: RlConfig,
    uodm: UodmModel,
    mix: Sequence[ScenarioConfig] | None = None,
    cem: CemParams = CemParams(),
    log_every: int = 1000,
    step_cap_factor: int = 10,
    progress: Callable[[CurvePoint], None] | None = None,
) -> tuple[QModel, list[CurvePoint]]:
    """Train a Q model for ``config.total_steps`` environment steps (one gradient step each once warm)."""
    mix = list(mix or default_training_mix())
    rng = np.random.default_rng(config.seed)
    model = QModel(config, np.random.default_rng([config.seed, 1]))
    learner = Learner(model)
    buffer = ReplayBuffer(config.buffer_capacity)
    curve: list[CurvePoint] = []
    window_td, window_cql, ep_rewards = [], [], []
    step = 0
    t0 = time.perf_counter()
    while step < config.total_steps:
        cfg = mix[int(rng.integers(len(mix)))]
        scenario = generate_scenario(cfg, int(rng.integers(2**31)))
        ep = Episode(scenario, uodm, "uodm", cem, rng=np.random.default_rng(int(rng.integers(2**31))))
        cap = step_cap_factor * scenario.n_objects
        total_r = 0.0
        ep.prepare()
        while step < config.total_steps and ep.n_steps < cap and ep.failed is None:
            valid = ep.valid_actions()
            if not valid:
                if ep.make_room():
                    ep.prepare()
                    continue
                break
            graph = ep.graph
            mask = ep.valid_mask(graph)
            eps = config.epsilon(step)
            q = model.q_values(graph) if eps < 1 else dict.fromkeys(graph.object_ids, 0.0)
            oid = select_action(q, valid, eps, rng)
            out = ep.step(oid)
            r = reward(out.misplaced, out.record.traversal, out.completed, config)
            total_r += r
            ep.prepare()
            nxt = ep.graph
            terminal = out.completed or ep.failed is not None
            buffer.add(Transition(graph, graph.object_ids.index(oid), r, nxt, ep.valid_mask(nxt), terminal, mask))
            step += 1
            if len(buffer) >= config.batch_size:
                loss = learner.train_step(buffer, rng)
                window_td.append(loss.td)
                window_cql.append(loss.cql)
            if step % log_every == 0:
                point = CurvePoint(
                    step,
                    float(np.mean(window_td)) if window_td else float("nan"),
                    float(np.mean(window_cql)) if window_cql else float("nan"),
                    float(np.mean(ep_rewards[-50:])) if ep_rewards else float("nan"),
                )
                curve.append(point)
                window_td, window_cql = [], []
                log.info("step %d td %.4f cql %.4f reward %.2f (%.0fs)", point.step, point.td_loss, point.cql_loss, point.mean_episode_reward, time.perf_counter() - t0)
                if progress is not None:
                    progress(point)
            if terminal:
                break
        ep_rewards.append(total_r)
    return model, curve


def write_curve(curve: Sequence[CurvePoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for p in curve:
            w.writerow([p.step, f"{p.td_loss:.6f}", f"{p.cql_loss:.6f}", f"{p.mean_episode_reward:.4f}"])
