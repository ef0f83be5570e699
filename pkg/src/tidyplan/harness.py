"""Episode driver, metrics, and benchmark suites."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .collision import CemParams
from .episode import EXPLORE, Episode, StepRecord
from .perception import WAYPOINTS_PER_ATTEMPT
from .gridworld import Scenario, ScenarioConfig, generate_scenario
from .rlplanner import QModel, RlConfig, heuristic_action, select_action
from .uodm import UodmModel

log = logging.getLogger(__name__)

PLANNERS = ("cql", "hp", "rs", "ge")
PLANNER_NAMES = {"cql": "cql", "heuristic": "hp", "random-search": "rs", "greedy-exploration": "ge"}


class MissingModelError(ValueError):
    pass


@dataclass
class EpisodeTrace:
    scenario_seed: int
    planner: str
    records: list[StepRecord]
    success: bool
    n_objects: int
    n_unseen: int  # objects not observed at the start
    discovery_attempts: int
    traversal_cells: int
    cell_size: float
    failure: str | None = None

    @property
    def n_steps(self) -> int:
        return len(self.records)

    def to_dict(self) -> dict:
        return {
            "scenario_seed": self.scenario_seed,
            "planner": self.planner,
            "success": int(self.success),
            "n_objects": self.n_objects,
            "n_unseen": self.n_unseen,
            "n_steps": self.n_steps,
            "discovery_attempts": self.discovery_attempts,
            "traversal_cells": self.traversal_cells,
            "cell_size": self.cell_size,
            "failure": self.failure,
            "records": [r.to_dict() for r in self.records],
        }


@dataclass
class Metrics:
    srn: float
    eod: float | None  # None when no discovery attempt was made
    ttl: float

    @property
    def eod_text(self) -> str:
        return "NC" if self.eod is None else f"{self.eod:.4f}"


def compute_metrics(trace: EpisodeTrace) -> Metrics:
    """Success per step, unseen objects per discovery attempt, and path length in meters."""
    s = 1 if trace.success else 0
    if trace.n_steps == 0:
        srn = float(s)
    else:
        srn = s * trace.n_objects / trace.n_steps
    eod = None if trace.discovery_attempts == 0 else trace.n_unseen / trace.discovery_attempts
    return Metrics(srn, eod, trace.traversal_cells * trace.cell_size)


# ---------------------------------------------------------------------------
# planners


@dataclass
class Planner:
    """Chooses the next object for an :class:`Episode`."""

    name: str
    qmodel: QModel | None = None
    ranking: str = "uodm"
    explores: bool = False

    def choose(self, ep: Episode, rng: np.random.Generator) -> str | None:
        valid = ep.valid_actions(include_unseen=not self.explores)
        if not valid:
            return None
        if self.name == "rs":
            return valid[int(rng.integers(len(valid)))]
        if self.qmodel is not None:
            return select_action(self.qmodel.q_values(ep.graph), valid, 0.0, rng)
        return heuristic_action(ep.knowledge, ep.state.agent, ep.state.nav, valid)


def make_planner(name: str, qmodel: QModel | None = None, uodm: UodmModel | None = None) -> Planner:
    name = PLANNER_NAMES.get(name, name)
    if name not in PLANNERS:
        raise ValueError(f"unknown planner {name!r}; choose from {PLANNERS}")
    if name == "cql":
        if qmodel is None or uodm is None:
            raise MissingModelError("the cql planner needs trained planner and discovery models")
        return Planner("cql", qmodel)
    if name == "hp":
        if uodm is None:
            raise MissingModelError("the heuristic planner needs a trained discovery model")
        return Planner("hp")
    if name == "rs":
        return Planner("rs", ranking="random")
    # exploration needs no discovery model; rearranges with the Q model when given
    return Planner("ge", qmodel, ranking="random", explores=True)


def run_episode(
    scenario: Scenario,
    planner: Planner,
    uodm: UodmModel | None = None,
    cem: CemParams = CemParams(),
    label_noise: float = 0.0,
    step_cap_factor: int = 10,
    seed: int | None = None,
    waypoints_per_attempt: int = WAYPOINTS_PER_ATTEMPT,
) -> EpisodeTrace:
    """Run the full decide/act/sense loop until nothing is left to do or the step cap is hit."""
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    ranker = uodm if planner.ranking == "uodm" else None
    ep = Episode(scenario, ranker, planner.ranking, cem, label_noise, rng, waypoints_per_attempt)
    cap = step_cap_factor * scenario.n_objects
    if planner.explores:
        while ep.knowledge.unseen and ep.n_steps < cap:
            if ep.explore_step() is None:
                break
    while ep.n_steps < cap and ep.failed is None:
        ep.prepare()
        if ep.failed is not None:
            break
        oid = planner.choose(ep, rng)
        if oid is None:
            if ep.make_room():
                continue
            break
        ep.step(oid)
    return EpisodeTrace(
        scenario_seed=scenario.seed,
        planner=planner.name,
        records=list(ep.records),
        success=ep.success and ep.n_steps <= cap,
        n_objects=scenario.n_objects,
        n_unseen=len(ep.initial_unseen),
        discovery_attempts=ep.knowledge.discovery_attempts,
        traversal_cells=ep.traversal,
        cell_size=scenario.grid.cell_size,
        failure=ep.failed,
    )


def replay_trace(scenario: Scenario, trace: EpisodeTrace, cem: CemParams = CemParams(), label_noise: float = 0.0) -> bool:
    """Re-execute a trace's actions on a fresh copy of the scenario; True when it ends with every object at its goal."""
    ep = Episode(scenario, None, "random", cem, label_noise, np.random.default_rng(0))
    for rec in trace.records:
        if rec.kind == EXPLORE:
            ep.explore_step(rec.dest, rec.discovery)
            continue
        ep.prepare()
        ep.step(rec.object_id, rec.receptacle if rec.kind == "search" else None)
    return ep.success


# ---------------------------------------------------------------------------
# benchmarks


@dataclass
class SuiteEntry:
    """One scenario family of a benchmark suite."""

    name: str
    scenario: ScenarioConfig
    n_episodes: int = 10


@dataclass
class BenchConfig:
    suites: list[SuiteEntry] = field(default_factory=list)
    planners: tuple[str, ...] = PLANNERS
    seed: int = 0
    label_noise: float = 0.0
    step_cap_factor: int = 10
    waypoints_per_attempt: int = WAYPOINTS_PER_ATTEMPT
    workers: int = 1  # episodes run in parallel processes when > 1


CSV_COLUMNS = ("suite", "planner", "seed", "N", "P.O.", "F.O.", "swaps", "S", "SRN", "EOD", "TTL")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _bench_episode(job) -> tuple[list[dict], list[dict]]:
    """All planners on one scenario; picklable so it can run in a worker process."""
    entry, seed, planners, uodm, cem, config = job
    scenario = generate_scenario(entry.scenario, seed)
    c = scenario.counts
    rows, times = [], []
    for planner in planners:
        t0 = time.perf_counter()
        trace = run_episode(
            scenario, planner, uodm, cem, config.label_noise, config.step_cap_factor,
            waypoints_per_attempt=config.waypoints_per_attempt,
        )
        dt = time.perf_counter() - t0
        m = compute_metrics(trace)
        rows.append(
            {
                "suite": entry.name,
                "planner": planner.name,
                "seed": seed,
                "N": scenario.n_objects,
                "P.O.": c.n_partially_occluded,
                "F.O.": c.n_fully_occluded,
                "swaps": c.n_swap,
                "S": int(trace.success),
                "SRN": _fmt(m.srn),
                "EOD": m.eod_text if m.eod is None else _fmt(m.eod),
                "TTL": _fmt(m.ttl),
            }
        )
        times.append({"suite": entry.name, "planner": planner.name, "seed": seed, "wall_time_s": dt})
        log.debug("%s %s seed=%d S=%d", entry.name, planner.name, seed, trace.success)
    return rows, times


def run_benchmark(
    config: BenchConfig,
    qmodel: QModel | None = None,
    uodm: UodmModel | None = None,
    cem: CemParams = CemParams(),
    timings: list | None = None,
) -> list[dict]:
    """One row per (suite, planner, episode seed). Wall time goes to ``timings`` only, keeping rows reproducible."""
    planners = [make_planner(p, qmodel, uodm) for p in config.planners]
    jobs = []
    for s_idx, entry in enumerate(config.suites):
        for e in range(entry.n_episodes):
            seed = config.seed * 1_000_003 + s_idx * 10_007 + e
            jobs.append((entry, seed, planners, uodm, cem, config))
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_bench_episode, jobs))
    else:
        results = [_bench_episode(j) for j in jobs]
    rows = []
    for r, t in results:
        rows += r
        if timings is not None:
            timings += t
    return rows


def rows_to_csv(rows: Iterable[dict], columns: Sequence[str] = CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in columns})
    return buf.getvalue()


def _mean_std(xs: list[float]) -> str:
    if not xs:
        return "NC"
    a = np.asarray(xs, dtype=float)
    return f"{a.mean():.2f} ± {a.std():.2f}"


AGG_COLUMNS = ("suite", "planner", "N", "P.O.", "F.O.", "swaps", "episodes", "success_rate", "SRN", "EOD", "TTL")


def aggregate(rows: Sequence[dict]) -> list[dict]:
    """Mean ± std per (suite, planner).

    SRN averages over all episodes (failures count as 0); EOD and TTL average
    over successful episodes only, and are NC when there are none.
    """
    groups: dict[tuple[str, str], list[dict]] = {}
    for r in rows:
        groups.setdefault((r["suite"], r["planner"]), []).append(r)
    out = []
    for (suite, planner), rs in groups.items():
        ok = [r for r in rs if int(r["S"]) == 1]
        eods = [float(r["EOD"]) for r in ok if r["EOD"] != "NC"]
        out.append(
            {
                "suite": suite,
                "planner": planner,
                "N": rs[0]["N"],
                "P.O.": rs[0]["P.O."],
                "F.O.": rs[0]["F.O."],
                "swaps": rs[0]["swaps"],
                "episodes": len(rs),
                "success_rate": f"{len(ok) / len(rs):.2f}",
                "SRN": _mean_std([float(r["SRN"]) for r in rs]),
                "EOD": _mean_std(eods),
                "TTL": _mean_std([float(r["TTL"]) for r in ok]),
            }
        )
    return out


def mean_eod(rows: Sequence[dict], planner: str) -> float | None:
    """Mean EOD over a planner's successful episodes; None (NC) when none is computable."""
    vals = [float(r["EOD"]) for r in rows if r["planner"] == planner and int(r["S"]) == 1 and r["EOD"] != "NC"]
    return float(np.mean(vals)) if vals else None


def table_suite(n_episodes: int = 10, sizes: Sequence[int] = (10, 20, 30)) -> list[SuiteEntry]:
    """Scenario families laid out like the published comparison table: per size, a P.O. row and an F.O. row."""
    out = []
    for n in sizes:
        k = int(math.ceil(0.4 * n))
        swaps = 2 if n <= 10 else 4
        out.append(SuiteEntry(f"N{n}-PO", ScenarioConfig(n_objects=n, n_partially_occluded=k, n_swap=swaps), n_episodes))
        out.append(SuiteEntry(f"N{n}-FO", ScenarioConfig(n_objects=n, n_fully_occluded=k, n_swap=swaps), n_episodes))
    return out
