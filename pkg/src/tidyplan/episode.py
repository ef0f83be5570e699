"""One rearrangement episode: predict, resolve collisions, choose, act, sense.

The :class:`Episode` owns the true world state and the agent's belief. Each
call to :meth:`Episode.step` is one planner step: a pick-place of an observed
object or a search for an unseen one. Navigation re-senses at every cell, so
objects spotted on the way are picked up by the belief immediately.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .collision import CemParams, NoFeasibleCellError, is_temporarily_static, resolve_collisions
from .geometry import Cell
from .gridworld import PickPlaceError, Scenario, WorldState, apply_pick_place
from .perception import WAYPOINTS_PER_ATTEMPT, init_knowledge, open_receptacle, sense, update_knowledge
from .stategraph import DirectedStateGraph, build_graph, graph_objects
from .uodm import UodmModel, apply_predictions, prune_candidate

PICK_PLACE, SEARCH, EXPLORE = "pick-place", "search", "explore"


@dataclass
class StepRecord:
    kind: str
    object_id: str | None
    traversal: int
    discovery: bool = False  # counts as a discovery attempt
    found: bool = False
    receptacle: str | None = None
    dest: Cell | None = None
    moved: list = field(default_factory=list)  # (object id, from, to) pick-places performed

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dest"] = None if self.dest is None else list(self.dest)
        d["moved"] = [[o, list(a), list(b)] for o, a, b in self.moved]
        return d


@dataclass
class StepOutcome:
    record: StepRecord
    misplaced: bool  # the chosen object was a real rearrangement target
    completed: bool  # every object is at its goal afterwards


class Episode:
    """State of one planner loop.

    ``ranking`` selects how unseen objects get predicted receptacles:
    ``"uodm"`` uses the learned filter/ranker, ``"random"`` draws uniformly
    from the un-pruned candidates before every step.
    """

    def __init__(
        self,
        scenario: Scenario,
        uodm: UodmModel | None = None,
        ranking: str = "uodm",
        cem: CemParams = CemParams(),
        label_noise: float = 0.0,
        rng: np.random.Generator | None = None,
        waypoints_per_attempt: int = WAYPOINTS_PER_ATTEMPT,
    ):
        if waypoints_per_attempt < 1:
            raise ValueError("waypoints_per_attempt must be positive")
        if ranking not in ("uodm", "random"):
            raise ValueError(f"unknown ranking {ranking!r}")
        if ranking == "uodm" and uodm is None:
            raise ValueError("uodm ranking needs a trained model")
        self.scenario = scenario
        self.uodm = uodm
        self.ranking = ranking
        self.cem = cem
        self.label_noise = label_noise
        self.rng = rng if rng is not None else np.random.default_rng(scenario.seed)
        self.state = WorldState.from_scenario(scenario)
        self.knowledge = init_knowledge(scenario, self.state, label_noise)
        self.initial_unseen = frozenset(self.knowledge.unseen)
        self.waypoints_per_attempt = waypoints_per_attempt
        self._waypoints = 0
        self.records: list[StepRecord] = []
        self.failed: str | None = None
        if uodm is not None:
            # the learned order is fixed once; later steps only prune
            apply_predictions(self.knowledge, uodm)
        self._graph: DirectedStateGraph | None = None

    # -- planning view

    def prepare(self) -> None:
        """Refresh predictions and resolved goals for the coming decision."""
        k = self.knowledge
        if self.ranking == "random":
            for oid in sorted(k.unseen):
                cands = k.candidate_receptacles.get(oid, [])
                if cands:
                    rid = cands[int(self.rng.integers(len(cands)))]
                    k.predicted[oid] = (rid, k.receptacle(rid).centroid)
                else:
                    k.predicted.pop(oid, None)
                    k.unfindable.add(oid)
        else:
            apply_predictions(k, self.uodm)
        try:
            resolve_collisions(k, self.cem, seed=self.scenario.seed)
        except NoFeasibleCellError as exc:
            self.failed = f"no buffer: {exc}"
        self._graph = None

    @property
    def graph(self) -> DirectedStateGraph:
        if self._graph is None:
            grid = self.scenario.grid
            self._graph = build_graph(self.knowledge, self.state.agent, self.state.nav, grid.width, grid.height)
        return self._graph

    def valid_actions(self, include_unseen: bool = True) -> list[str]:
        k = self.knowledge
        out = []
        for oid in graph_objects(k):
            if is_temporarily_static(k, oid):
                continue
            if not include_unseen and oid not in k.visible:
                continue
            out.append(oid)
        return out

    def valid_mask(self, graph: DirectedStateGraph | None = None) -> np.ndarray:
        graph = graph or self.graph
        valid = set(self.valid_actions())
        return np.array([oid in valid for oid in graph.object_ids], dtype=bool)

    @property
    def success(self) -> bool:
        return self.failed is None and self.state.all_at_goal()

    # -- acting

    def _sense_at(self, cell: Cell) -> None:
        self.state.agent = cell
        update_knowledge(self.knowledge, sense(self.state, cell, label_noise=self.label_noise))

    def _walk(self, target: Cell, stop_when_seen: str | None = None) -> tuple[int, bool]:
        """Walk to ``target`` sensing each cell; optionally stop once an object is observed."""
        path = self.state.nav.path(self.state.agent, target)
        if not path.reachable:
            raise PickPlaceError(f"{target} unreachable from {self.state.agent}")
        start = self.state.agent
        for n, cell in enumerate(path.cells[1:], start=1):
            self._sense_at(cell)
            if stop_when_seen is not None and stop_when_seen in self.knowledge.visible:
                return n, True
        if not path.cells[1:]:
            self._sense_at(start)
        return path.length, stop_when_seen is not None and stop_when_seen in self.knowledge.visible

    def _pick_place(self, oid: str, dest: Cell) -> tuple[int, tuple]:
        """Carry ``oid`` to ``dest`` sensing along both legs; returns (cells, move)."""
        src = self.state.positions[oid]
        walked = 0
        if self.state.agent != src:
            walked, _ = self._walk(src)
        state = self.state
        carried = apply_pick_place(state, oid, dest)  # agent is already at src: this is the carry leg
        # re-sense along the carry leg
        leg = state.nav.path(src, dest)
        for cell in leg.cells[1:]:
            self._sense_at(cell)
        self.knowledge.record_move(oid, dest)
        self._sense_at(dest)
        return walked + carried, (oid, src, dest)

    def step(self, oid: str, receptacle: str | None = None) -> StepOutcome:
        """Execute one planner action on ``oid``.

        ``receptacle`` forces the searched receptacle for an unseen object
        (used when replaying a trace).
        """
        k = self.knowledge
        misplaced = oid in graph_objects(k) and not is_temporarily_static(k, oid)
        if oid in k.visible:
            rec = self._rearrange(oid)
        else:
            rec = self._search(oid, receptacle)
        self.records.append(rec)
        self._graph = None
        return StepOutcome(rec, misplaced, self.state.all_at_goal())

    def _rearrange(self, oid: str) -> StepRecord:
        dest = self.knowledge.goal_for(oid)
        rec = StepRecord(PICK_PLACE, oid, 0, dest=dest)
        try:
            cells, move = self._pick_place(oid, dest)
        except PickPlaceError as exc:
            # belief disagreed with the world (e.g. a mislabelled object sits on dest)
            self.failed = self.failed or f"pick-place failed: {exc}"
            return rec
        rec.traversal = cells
        if move[1] != move[2]:
            rec.moved.append(move)
        return rec

    def _search(self, oid: str, forced: str | None) -> StepRecord:
        k = self.knowledge
        if forced is not None:
            k.predicted[oid] = (forced, k.receptacle(forced).centroid)
        pred = k.predicted.get(oid)
        if pred is None:
            raise ValueError(f"{oid} has no predicted receptacle")
        rid, centroid = pred
        rec = StepRecord(SEARCH, oid, 0, discovery=True, receptacle=rid)
        try:
            walked, found = self._walk(centroid, stop_when_seen=oid)
        except PickPlaceError as exc:
            self.failed = self.failed or f"search failed: {exc}"
            return rec
        if not found:
            r = k.receptacle(rid)
            if r.openable and not self.state.open[rid]:
                open_receptacle(self.state, rid)
                self._sense_at(self.state.agent)
            found = oid in k.visible
        rec.traversal = walked
        rec.found = found
        if found:
            k.discovery_attempts += 1
            # the goal may now be contested by an object seen on the way
            try:
                resolve_collisions(k, self.cem, seed=self.scenario.seed)
            except NoFeasibleCellError as exc:
                self.failed = f"no buffer: {exc}"
                return rec
            if k.is_misplaced(oid) and not is_temporarily_static(k, oid):
                dest = k.goal_for(oid)
                rec.dest = dest
                try:
                    cells, move = self._pick_place(oid, dest)
                except PickPlaceError as exc:
                    self.failed = self.failed or f"pick-place failed: {exc}"
                    return rec
                rec.traversal += cells
                if move[1] != move[2]:
                    rec.moved.append(move)
        elif rid in k.candidate_receptacles.get(oid, []):
            prune_candidate(k, oid, rid)
        else:
            # the receptacle was already dropped by the inspection rule while walking
            k.discovery_attempts += 1
        return rec

    def make_room(self) -> bool:
        """With nothing valid to do but a swap waiting for buffer space, explore for more surface.

        Returns False (and marks the episode failed) once the map is covered.
        """
        if not self.knowledge.pending_buffers:
            return False
        if self.explore_step(discovery=False) is None:
            self.failed = "no buffer space for a swap"
            return False
        return True

    def explore_step(self, waypoint: Cell | None = None, discovery: bool = True) -> StepRecord | None:
        """Walk to the nearest unsensed reachable free cell; None when the map is covered."""
        from .rlplanner import next_frontier

        if waypoint is None:
            waypoint = next_frontier(self.knowledge.sensed, self.scenario.grid.free, self.state.agent, self.state.nav)
            if waypoint is None:
                return None
        walked, _ = self._walk(tuple(waypoint))
        if discovery:
            self._waypoints += 1
            discovery = self._waypoints % self.waypoints_per_attempt == 0
        rec = StepRecord(EXPLORE, None, walked, discovery=discovery, dest=tuple(waypoint))
        if discovery:
            self.knowledge.discovery_attempts += 1
        self.records.append(rec)
        self._graph = None
        return rec

    # -- bookkeeping

    @property
    def n_steps(self) -> int:
        return len(self.records)

    @property
    def traversal(self) -> int:
        return sum(r.traversal for r in self.records)
