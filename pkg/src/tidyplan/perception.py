"""Simulated egocentric sensing and the agent's belief state.

Sensing is 360 degree, radius limited, and blocked by walls only. Objects in a
closed container are never sensed. The belief (:class:`Knowledge`) is built
from the goal-state object list plus observations, and never reads the true
current position of an object that has not been observed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .geometry import Cell, footprint_cells, visible_mask
from .gridworld import SURFACE, Receptacle, Scenario, WorldState


# an exploring agent counts one discovery attempt per this many frontier waypoints
WAYPOINTS_PER_ATTEMPT = 1


class PerceptionError(RuntimeError):
    pass


class NotOpenableError(PerceptionError):
    pass


class NotAdjacentError(PerceptionError):
    pass


@dataclass(frozen=True)
class Detection:
    object_id: str
    label: str
    cell: Cell
    container: str | None = None


@dataclass(frozen=True)
class Observation:
    pose: Cell
    detections: tuple[Detection, ...]
    sensed: np.ndarray
    open_receptacles: frozenset[str] = frozenset()


@dataclass(frozen=True)
class GoalSpec:
    """What the goal-state survey tells the agent about one object."""

    id: str
    label: str
    footprint: tuple[int, int]
    goal_pos: Cell


def _coin(*parts) -> float:
    h = hashlib.blake2b(":".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") / 2**64


def sense(state: WorldState, pose: Cell | None = None, radius: float | None = None, label_noise: float = 0.0) -> Observation:
    """Objects observable from ``pose`` (defaults to the agent cell).

    An object is observed when it is not inside a closed container and some
    cell of its footprint (or its open container's centroid) has an unblocked
    ray from ``pose`` within ``radius``. With ``label_noise > 0`` a detection's
    label is replaced, deterministically per (object, pose), by another label.
    """
    scenario = state.scenario
    pose = state.agent if pose is None else tuple(int(v) for v in pose)
    radius = scenario.sensing_radius if radius is None else radius
    mask = visible_mask(scenario.grid.walls, pose, radius)
    labels = sorted({o.label for o in scenario.objects})
    dets = []
    for o in scenario.objects:
        rid = state.inside[o.id]
        if rid is not None:
            if not state.open[rid]:
                continue
            cells = (scenario.receptacle(rid).centroid,)
        else:
            cells = footprint_cells(state.positions[o.id], o.footprint)
        if not any(mask[y, x] for x, y in cells):
            continue
        label = o.label
        if label_noise > 0 and len(labels) > 1 and _coin("flip", scenario.seed, o.id, pose) < label_noise:
            others = [lbl for lbl in labels if lbl != o.label]
            label = others[int(_coin("pick", scenario.seed, o.id, pose) * len(others))]
        dets.append(Detection(o.id, label, state.positions[o.id], rid))
    opened = frozenset(rid for rid, is_open in state.open.items() if is_open and scenario.receptacle(rid).openable)
    return Observation(pose=pose, detections=tuple(dets), sensed=mask, open_receptacles=opened)


def open_receptacle(state: WorldState, receptacle_id: str) -> list[str]:
    """Open a container next to the agent; returns ids of the objects inside."""
    rec = state.scenario.receptacle(receptacle_id)
    if not rec.openable:
        raise NotOpenableError(f"{rec.label} cannot be opened")
    ax, ay = state.agent
    if not any(abs(ax - x) + abs(ay - y) <= 1 for x, y in rec.surface_cells):
        raise NotAdjacentError(f"agent at {state.agent} is not next to {rec.label}")
    state.open[receptacle_id] = True
    return sorted(oid for oid, rid in state.inside.items() if rid == receptacle_id)


@dataclass
class Knowledge:
    """The agent's belief during an episode."""

    goals: dict[str, GoalSpec]
    receptacles: tuple[Receptacle, ...]
    surface: np.ndarray
    visible: dict[str, Cell] = field(default_factory=dict)
    contained: dict[str, str] = field(default_factory=dict)
    unseen: set[str] = field(default_factory=set)
    predicted: dict[str, tuple[str, Cell]] = field(default_factory=dict)
    resolved_goals: dict[str, Cell] = field(default_factory=dict)
    candidate_receptacles: dict[str, list[str]] = field(default_factory=dict)
    free_map: np.ndarray | None = None
    discovery_attempts: int = 0
    sensed: np.ndarray | None = None
    opened: set[str] = field(default_factory=set)
    inspected: set[str] = field(default_factory=set)
    unfindable: set[str] = field(default_factory=set)
    buffers: dict = field(default_factory=dict)
    pending_buffers: set = field(default_factory=set)  # swap pairs still waiting for buffer space

    @classmethod
    def from_goal_state(cls, scenario: Scenario) -> "Knowledge":
        goals = {o.id: GoalSpec(o.id, o.label, o.footprint, o.goal_pos) for o in scenario.objects}
        recs = tuple(r for r in scenario.receptacles)
        surface = scenario.grid.cells == SURFACE
        shape = surface.shape
        k = cls(goals=goals, receptacles=recs, surface=surface, unseen=set(goals))
        k.sensed = np.zeros(shape, dtype=bool)
        k.free_map = np.zeros(shape, dtype=bool)
        k.candidate_receptacles = {oid: [r.id for r in recs] for oid in goals}
        return k

    def receptacle(self, rid: str) -> Receptacle:
        for r in self.receptacles:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def footprint(self, oid: str) -> frozenset[Cell]:
        if oid in self.contained or oid not in self.visible:
            return frozenset()
        return footprint_cells(self.visible[oid], self.goals[oid].footprint)

    def is_misplaced(self, oid: str) -> bool:
        return oid in self.unseen or oid in self.contained or self.visible[oid] != self.goals[oid].goal_pos

    def goal_for(self, oid: str) -> Cell:
        return self.resolved_goals.get(oid, self.goals[oid].goal_pos)

    def position(self, oid: str) -> Cell | None:
        """Believed current position: observed cell, or predicted receptacle for unseen objects."""
        if oid in self.visible:
            return self.visible[oid]
        pred = self.predicted.get(oid)
        return None if pred is None else pred[1]

    def refresh_free_map(self) -> None:
        occ = np.zeros_like(self.surface)
        for oid in self.visible:
            for x, y in self.footprint(oid):
                occ[y, x] = True
        self.free_map = self.surface & self.sensed & ~occ

    def record_move(self, oid: str, cell: Cell) -> None:
        """The agent itself moved a visible object."""
        self.visible[oid] = cell
        self.contained.pop(oid, None)


def init_knowledge(scenario: Scenario, state: WorldState, label_noise: float = 0.0) -> Knowledge:
    k = Knowledge.from_goal_state(scenario)
    return update_knowledge(k, sense(state, label_noise=label_noise))


def update_knowledge(knowledge: Knowledge, observation: Observation) -> Knowledge:
    """Fold one observation into the belief (in place; also returned).

    Newly observed objects move from unseen to visible and lose their
    predictions. Receptacles that are now fully inspected (every surface cell
    sensed, or a container seen open) cannot hold an unseen object and are
    dropped from every candidate list. The free-receptacle map is refreshed.
    """
    k = knowledge
    for det in observation.detections:
        spec = k.goals.get(det.object_id)
        if spec is None or det.label != spec.label:
            # mislabelled detections cannot be matched to the survey and are ignored
            continue
        k.visible[det.object_id] = det.cell
        if det.container is not None:
            k.contained[det.object_id] = det.container
        else:
            k.contained.pop(det.object_id, None)
        if det.object_id in k.unseen:
            k.unseen.discard(det.object_id)
            k.predicted.pop(det.object_id, None)
            k.candidate_receptacles.pop(det.object_id, None)
            k.unfindable.discard(det.object_id)
    k.sensed |= observation.sensed
    k.opened |= set(observation.open_receptacles)
    newly = []
    for rec in k.receptacles:
        if rec.id in k.inspected:
            continue
        cx, cy = rec.centroid
        if rec.openable:
            done = rec.id in k.opened and bool(k.sensed[cy, cx])
        else:
            done = all(k.sensed[y, x] for x, y in rec.surface_cells)
        if done:
            newly.append(rec.id)
    if newly:
        k.inspected.update(newly)
        for oid, cands in k.candidate_receptacles.items():
            kept = [r for r in cands if r not in k.inspected]
            if len(kept) != len(cands):
                k.candidate_receptacles[oid] = kept
                if not kept:
                    k.unfindable.add(oid)
    k.refresh_free_map()
    return k
