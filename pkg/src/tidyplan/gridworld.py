"""Deterministic multi-room grid environment.

The floorplan is a 2x2 grid of square rooms separated by walls with one-cell
doorways. Each room holds four receptacle islands (two cells deep, so every
cell touches a free cell): three surfaces and one openable container.
Objects occupy axis-aligned rectangles of cells on surfaces, or sit inside a
container with no footprint on the map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .geometry import Cell, footprint_cells, visible_mask
from .nav import Navigator
from .vocab import ROOM_KINDS, ROOM_RECEPTACLES, object_size, object_vocabulary, prior_score, room_receptacle_label

FREE, WALL, SURFACE, INTERIOR = 0, 1, 2, 3
TAG_CHARS = ".#si"

CASES = ("static", "visible", "po", "fo", "swap", "blocked", "blocker")


class ScenarioError(ValueError):
    pass


class CapacityError(ScenarioError):
    pass


class InfeasibleSwapError(ScenarioError):
    pass


class PickPlaceError(RuntimeError):
    pass


class UnreachableObjectError(PickPlaceError):
    pass


class DestinationOccupiedError(PickPlaceError):
    pass


class InaccessibleObjectError(PickPlaceError):
    pass


@dataclass(frozen=True, eq=False)
class GridMap:
    width: int
    height: int
    cells: np.ndarray
    cell_size: float = 0.25

    def __post_init__(self):
        if self.width < 4 or self.height < 4:
            raise ValueError("grid must be at least 4x4")
        if self.cells.shape != (self.height, self.width):
            raise ValueError(f"cells shape {self.cells.shape} != {(self.height, self.width)}")
        self.cells.setflags(write=False)

    def __eq__(self, other):
        return (
            isinstance(other, GridMap)
            and (self.width, self.height, self.cell_size) == (other.width, other.height, other.cell_size)
            and np.array_equal(self.cells, other.cells)
        )

    @property
    def free(self) -> np.ndarray:
        return self.cells == FREE

    @property
    def walls(self) -> np.ndarray:
        return self.cells == WALL

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def tag(self, cell: Cell) -> int:
        return int(self.cells[cell[1], cell[0]])

    def to_rows(self) -> list[str]:
        return ["".join(TAG_CHARS[v] for v in row) for row in self.cells]

    @classmethod
    def from_rows(cls, rows: list[str], cell_size: float = 0.25) -> "GridMap":
        cells = np.array([[TAG_CHARS.index(c) for c in row] for row in rows], dtype=np.uint8)
        return cls(width=cells.shape[1], height=cells.shape[0], cells=cells, cell_size=cell_size)


@dataclass(frozen=True)
class Room:
    id: str
    kind: str
    cell_region: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive

    def contains(self, cell: Cell) -> bool:
        x0, y0, x1, y1 = self.cell_region
        return x0 <= cell[0] <= x1 and y0 <= cell[1] <= y1

    @property
    def centre(self) -> Cell:
        x0, y0, x1, y1 = self.cell_region
        return ((x0 + x1) // 2, (y0 + y1) // 2)


@dataclass(frozen=True)
class Receptacle:
    id: str
    label: str
    room_id: str
    surface_cells: tuple[Cell, ...]
    openable: bool
    centroid: Cell
    open: bool = True

    def __post_init__(self):
        if not self.surface_cells:
            raise ValueError(f"receptacle {self.id} has no cells")
        if not self.openable and not self.open:
            raise ValueError(f"non-openable receptacle {self.id} cannot be closed")


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    label: str
    footprint: tuple[int, int]
    current_pos: Cell
    goal_pos: Cell
    goal_receptacle: str
    inside: str | None = None
    case: str = "static"
    partner: str | None = None

    def __post_init__(self):
        if self.footprint[0] < 1 or self.footprint[1] < 1:
            raise ValueError(f"object {self.id} footprint must be at least 1x1")
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}")

    def goal_cells(self) -> frozenset[Cell]:
        return footprint_cells(self.goal_pos, self.footprint)

    def current_cells(self) -> frozenset[Cell]:
        if self.inside is not None:
            return frozenset()
        return footprint_cells(self.current_pos, self.footprint)

    @property
    def misplaced(self) -> bool:
        return self.inside is not None or self.current_pos != self.goal_pos


@dataclass(frozen=True)
class Counts:
    n_visible: int
    n_partially_occluded: int
    n_fully_occluded: int
    n_swap: int
    n_blocked: int = 0


@dataclass(frozen=True)
class Scenario:
    seed: int
    grid: GridMap
    rooms: tuple[Room, ...]
    receptacles: tuple[Receptacle, ...]
    objects: tuple[ObjectInstance, ...]
    agent_start: Cell
    counts: Counts
    sensing_radius: float = 8.0

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    def receptacle(self, rid: str) -> Receptacle:
        for r in self.receptacles:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def object(self, oid: str) -> ObjectInstance:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def room_of(self, cell: Cell) -> Room | None:
        for room in self.rooms:
            if room.contains(cell):
                return room
        return None


@dataclass(frozen=True)
class ScenarioConfig:
    n_objects: int = 10
    n_partially_occluded: int = 0
    n_fully_occluded: int = 0
    n_swap: int = 0
    n_blocked: int = 0
    n_static: int = 0
    room_size: int = 0  # 0 picks a size from n_objects
    cell_size: float = 0.25
    sensing_radius: float = 0.0  # 0 picks 8 cells, or 3/4 of the room side for larger rooms

    @property
    def n_visible(self) -> int:
        return self.n_objects - self.n_partially_occluded - self.n_fully_occluded

    @property
    def resolved_room_size(self) -> int:
        return self.room_size or auto_room_size(self.n_objects)

    @property
    def resolved_sensing_radius(self) -> float:
        return self.sensing_radius or max(8.0, 0.75 * self.resolved_room_size)


def auto_room_size(n_objects: int) -> int:
    """Room side length (odd, in cells) that leaves space for shuffling ``n_objects``."""
    if n_objects <= 12:
        return 11
    if n_objects <= 22:
        return 15
    return 21


# ---------------------------------------------------------------------------
# floorplan


def build_floorplan(room_size: int, rng: np.random.Generator, cell_size: float = 0.25):
    """Rooms, receptacles and the occupancy grid for a 2x2 room layout."""
    r = room_size
    if r < 9 or r % 2 == 0:
        raise ValueError("room_size must be odd and >= 9")
    w = h = 2 * r + 3
    cells = np.full((h, w), FREE, dtype=np.uint8)
    cells[0, :] = cells[-1, :] = WALL
    cells[:, 0] = cells[:, -1] = WALL
    cells[r + 1, :] = WALL
    cells[:, r + 1] = WALL
    half = r // 2
    for x, y in ((r + 1, 1 + half), (r + 1, r + 2 + half), (1 + half, r + 1), (r + 2 + half, r + 1)):
        cells[y, x] = FREE

    kinds = [ROOM_KINDS[i] for i in rng.permutation(len(ROOM_KINDS))]
    origins = [(1, 1), (r + 2, 1), (1, r + 2), (r + 2, r + 2)]
    rooms, receptacles = [], []
    slot = (r - 1) // 2
    long_side = slot - 2
    for ri, ((x0, y0), kind) in enumerate(zip(origins, kinds)):
        room = Room(id=f"room{ri}", kind=kind, cell_region=(x0, y0, x0 + r - 1, y0 + r - 1))
        rooms.append(room)
        slots = [(x0, y0), (x0 + slot + 1, y0), (x0, y0 + slot + 1), (x0 + slot + 1, y0 + slot + 1)]
        order = rng.permutation(4)
        for k, (name, openable) in enumerate(ROOM_RECEPTACLES[kind]):
            sx, sy = slots[order[k]]
            horizontal = bool(rng.integers(2))
            rw, rh = (long_side, 2) if horizontal else (2, long_side)
            ox = sx + 1 + int(rng.integers(slot - 2 - rw + 1))
            oy = sy + 1 + int(rng.integers(slot - 2 - rh + 1))
            island = sorted(footprint_cells((ox, oy), (rw, rh)), key=lambda c: (c[1], c[0]))
            for cx, cy in island:
                cells[cy, cx] = INTERIOR if openable else SURFACE
            mx = sum(c[0] for c in island) / len(island)
            my = sum(c[1] for c in island) / len(island)
            centroid = min(island, key=lambda c: ((c[0] - mx) ** 2 + (c[1] - my) ** 2, c[1], c[0]))
            receptacles.append(
                Receptacle(
                    id=f"rec{len(receptacles):02d}",
                    label=room_receptacle_label(kind, name),
                    room_id=room.id,
                    surface_cells=tuple(island),
                    openable=openable,
                    centroid=centroid,
                    open=not openable,
                )
            )
    grid = GridMap(width=w, height=h, cells=cells, cell_size=cell_size)
    return grid, tuple(rooms), tuple(receptacles)


# ---------------------------------------------------------------------------
# placement helpers


class _Placer:
    def __init__(self, receptacles: Iterable[Receptacle], rng: np.random.Generator):
        self.surfaces = [r for r in receptacles if not r.openable]
        self.rng = rng

    def anchors(self, rec: Receptacle, size, allowed, blocked: set) -> list[Cell]:
        surface = set(rec.surface_cells)
        out = []
        for anchor in rec.surface_cells:
            fp = footprint_cells(anchor, size)
            if fp <= surface and all(allowed(c) for c in fp) and not (fp & blocked):
                out.append(anchor)
        return out

    def place(self, label: str, size, allowed, blocked: set, weighted: bool = True):
        """Pick a (receptacle, anchor); receptacles weighted by the prior score when any is probable."""
        options = []
        for rec in self.surfaces:
            anchors = self.anchors(rec, size, allowed, blocked)
            if anchors:
                options.append((rec, anchors))
        if not options:
            return None
        weights = np.array([prior_score(label, rec.label) for rec, _ in options]) if weighted else None
        if weights is None or weights.sum() <= 0:
            weights = np.ones(len(options))
        k = int(self.rng.choice(len(options), p=weights / weights.sum()))
        rec, anchors = options[k]
        return rec, anchors[int(self.rng.integers(len(anchors)))]


def _assign_cases(labels: list[str], cfg: ScenarioConfig, rng: np.random.Generator):
    """Return per-object (case, partner) in id order."""
    n = len(labels)
    cases: list[list] = [["visible", None] for _ in range(n)]
    remaining = list(rng.permutation(n))
    by_size: dict[tuple[int, int], list[int]] = {}
    for i in remaining:
        by_size.setdefault(object_size(labels[i]), []).append(int(i))

    def take_pair():
        for size in sorted(by_size, key=lambda s: -len(by_size[s])):
            pool = by_size[size]
            if len(pool) >= 2:
                a, b = pool.pop(0), pool.pop(0)
                return a, b
        return None

    for _ in range(cfg.n_swap // 2):
        pair = take_pair()
        if pair is None:
            raise InfeasibleSwapError("no pair of equally sized objects for a swap")
        a, b = pair
        cases[a] = ["swap", b]
        cases[b] = ["swap", a]
    for _ in range(cfg.n_blocked):
        pair = take_pair()
        if pair is None:
            raise InfeasibleSwapError("no pair of equally sized objects for a blocked goal")
        blocked, blocker = pair
        cases[blocked] = ["blocked", blocker]
        cases[blocker] = ["blocker", blocked]
    rest = [i for pool in by_size.values() for i in pool]
    rest.sort(key=lambda i: remaining.index(i))
    quotas = [("po", cfg.n_partially_occluded), ("fo", cfg.n_fully_occluded), ("static", cfg.n_static)]
    for case, count in quotas:
        for _ in range(count):
            if not rest:
                raise CapacityError("more cases requested than objects")
            cases[rest.pop(0)][0] = case
    return cases


GENERATION_ATTEMPTS = 25


def generate_scenario(cfg: ScenarioConfig, seed: int) -> Scenario:
    """Build a goal layout, shuffle it into an untidy current state, and return the scenario.

    Pure function of ``(cfg, seed)``. Unlucky layouts are redrawn from derived
    random streams; the last placement error is raised if every attempt fails.
    """
    n = cfg.n_objects
    if n <= 0:
        raise CapacityError("scenario needs at least one object")
    if cfg.n_swap % 2:
        raise ScenarioError("n_swap counts objects and must be even")
    vocab = object_vocabulary()
    if n > len(vocab):
        raise CapacityError(f"{n} objects requested, vocabulary holds {len(vocab)}")
    if cfg.n_partially_occluded + cfg.n_fully_occluded + cfg.n_swap + 2 * cfg.n_blocked + cfg.n_static > n:
        raise CapacityError("case counts exceed the number of objects")
    last: ScenarioError | None = None
    for attempt in range(GENERATION_ATTEMPTS):
        rng = np.random.default_rng(seed if attempt == 0 else [seed, attempt])
        try:
            return _generate(cfg, seed, vocab, rng)
        except ScenarioError as exc:
            last = exc
    assert last is not None
    raise last


def _generate(cfg: ScenarioConfig, seed: int, vocab, rng: np.random.Generator) -> Scenario:
    n = cfg.n_objects
    grid, rooms, receptacles = build_floorplan(cfg.resolved_room_size, rng, cfg.cell_size)
    start_room = rooms[int(rng.integers(len(rooms)))]
    agent_start = start_room.centre
    view = visible_mask(grid.walls, agent_start, cfg.resolved_sensing_radius)

    labels = [vocab[i] for i in sorted(rng.choice(len(vocab), size=n, replace=False))]
    cases = _assign_cases(labels, cfg, rng)

    placer = _Placer(receptacles, rng)
    in_view = lambda c: bool(view[c[1], c[0]])  # noqa: E731
    anywhere = lambda c: True  # noqa: E731
    goal_occ: set[Cell] = set()
    goals: dict[int, tuple[Receptacle, Cell]] = {}
    # goals that must be visible from the start come first
    order = sorted(range(n), key=lambda i: (cases[i][0] not in ("swap", "blocked", "static"), i))
    for i in order:
        allowed = in_view if cases[i][0] in ("swap", "blocked", "static") else anywhere
        size = object_size(labels[i])
        picked = placer.place(labels[i], size, allowed, goal_occ)
        if picked is None:
            raise CapacityError(f"no room for the goal of {labels[i]}")
        goals[i] = picked
        goal_occ |= footprint_cells(picked[1], size)

    objects = []
    for i in range(n):
        rec, anchor = goals[i]
        case, partner = cases[i]
        objects.append(
            ObjectInstance(
                id=f"obj{i:02d}",
                label=labels[i],
                footprint=object_size(labels[i]),
                current_pos=anchor,
                goal_pos=anchor,
                goal_receptacle=rec.id,
                case=case,
                partner=None if partner is None else f"obj{partner:02d}",
            )
        )
    counts = Counts(
        n_visible=cfg.n_visible,
        n_partially_occluded=cfg.n_partially_occluded,
        n_fully_occluded=cfg.n_fully_occluded,
        n_swap=cfg.n_swap,
        n_blocked=cfg.n_blocked,
    )
    goal = Scenario(
        seed=seed,
        grid=grid,
        rooms=rooms,
        receptacles=receptacles,
        objects=tuple(objects),
        agent_start=agent_start,
        counts=counts,
        sensing_radius=cfg.resolved_sensing_radius,
    )
    placements = shuffle_to_untidy(goal, rng)
    scenario = replace(
        goal,
        objects=tuple(replace(o, current_pos=placements[o.id][0], inside=placements[o.id][1]) for o in goal.objects),
    )
    _check_reachable(scenario)
    return scenario


def shuffle_to_untidy(goal: Scenario, rng: np.random.Generator) -> dict[str, tuple[Cell, str | None]]:
    """Current placements for a goal-state scenario, driven by each object's ``case``.

    ``static`` objects stay at their goals. Swap pairs trade goal positions,
    blockers sit on their partner's goal, and the other shuffled objects land
    on free surface cells visible from the start (``visible``/``blocked``),
    hidden from it (``po``), or inside a closed container (``fo``).
    Returns ``{object_id: (current_pos, inside_receptacle_id_or_None)}``.
    """
    view = visible_mask(goal.grid.walls, goal.agent_start, goal.sensing_radius)
    in_view = lambda c: bool(view[c[1], c[0]])  # noqa: E731
    hidden = lambda c: not view[c[1], c[0]]  # noqa: E731
    placer = _Placer(goal.receptacles, rng)
    by_id = {o.id: o for o in goal.objects}
    reserved: set[Cell] = set()
    for o in goal.objects:
        reserved |= o.goal_cells()
    out: dict[str, tuple[Cell, str | None]] = {}
    occupied: set[Cell] = set()

    def put(oid: str, anchor: Cell, inside: str | None = None):
        out[oid] = (anchor, inside)
        if inside is None:
            occupied.update(footprint_cells(anchor, by_id[oid].footprint))

    for o in goal.objects:
        if o.case == "static":
            put(o.id, o.goal_pos)
    for o in goal.objects:
        if o.case == "swap" and o.id not in out:
            p = by_id[o.partner]
            if p.footprint != o.footprint:
                raise InfeasibleSwapError(f"swap pair {o.id}/{p.id} has mismatched footprints")
            put(o.id, p.goal_pos)
            put(p.id, o.goal_pos)
        elif o.case == "blocker":
            blocked = by_id[o.partner]
            fp = footprint_cells(blocked.goal_pos, o.footprint)
            rec = goal.receptacle(blocked.goal_receptacle)
            clash = (reserved - blocked.goal_cells()) & fp
            if not fp <= set(rec.surface_cells) or clash or fp & occupied:
                raise InfeasibleSwapError(f"blocker {o.id} does not fit on the goal of {blocked.id}")
            put(o.id, blocked.goal_pos)
    for o in goal.objects:
        if o.id in out:
            continue
        if o.case == "fo":
            containers = [r for r in goal.receptacles if r.openable]
            weights = np.array([prior_score(o.label, r.label) for r in containers])
            if weights.sum() <= 0:
                weights = np.ones(len(containers))
            rec = containers[int(rng.choice(len(containers), p=weights / weights.sum()))]
            put(o.id, rec.centroid, rec.id)
            continue
        allowed = hidden if o.case == "po" else in_view
        picked = placer.place(o.label, o.footprint, allowed, reserved | occupied, weighted=o.case == "po")
        if picked is None:
            raise CapacityError(f"no free {'hidden' if o.case == 'po' else 'visible'} cell for {o.label}")
        put(o.id, picked[1])
    return out


def _check_reachable(scenario: Scenario) -> None:
    nav = Navigator(scenario.grid.free, scenario.grid.walls)
    for o in scenario.objects:
        for cell in (o.current_pos, o.goal_pos):
            if nav.length(scenario.agent_start, cell) < 0:
                raise ScenarioError(f"object {o.id} unreachable from the agent start")


# ---------------------------------------------------------------------------
# mutable episode state


@dataclass
class WorldState:
    """Mutable current state of one episode: object placements, container doors, agent pose."""

    scenario: Scenario
    positions: dict[str, Cell]
    inside: dict[str, str | None]
    open: dict[str, bool]
    agent: Cell
    nav: Navigator = field(repr=False)

    @classmethod
    def from_scenario(cls, scenario: Scenario, nav: Navigator | None = None) -> "WorldState":
        return cls(
            scenario=scenario,
            positions={o.id: o.current_pos for o in scenario.objects},
            inside={o.id: o.inside for o in scenario.objects},
            open={r.id: r.open for r in scenario.receptacles},
            agent=scenario.agent_start,
            nav=nav or Navigator(scenario.grid.free, scenario.grid.walls),
        )

    def copy(self) -> "WorldState":
        return WorldState(self.scenario, dict(self.positions), dict(self.inside), dict(self.open), self.agent, self.nav)

    def footprint(self, oid: str) -> frozenset[Cell]:
        if self.inside[oid] is not None:
            return frozenset()
        return footprint_cells(self.positions[oid], self.scenario.object(oid).footprint)

    def occupied(self, exclude: str | None = None) -> set[Cell]:
        cells: set[Cell] = set()
        for oid in self.positions:
            if oid != exclude:
                cells |= self.footprint(oid)
        return cells

    def at_goal(self, oid: str) -> bool:
        o = self.scenario.object(oid)
        return self.inside[oid] is None and self.positions[oid] == o.goal_pos

    def all_at_goal(self) -> bool:
        return all(self.at_goal(o.id) for o in self.scenario.objects)

    def hidden_in_closed(self, oid: str) -> bool:
        rid = self.inside[oid]
        return rid is not None and not self.open[rid]


def apply_pick_place(state: WorldState, object_id: str, dest: Cell) -> int:
    """Carry ``object_id`` to ``dest``; returns the traversal length in cells.

    The traversal is BFS(agent, object) + BFS(object, dest). The agent ends at
    ``dest``. Moving an object onto its own current cell only walks to it.
    """
    obj = state.scenario.object(object_id)
    if state.hidden_in_closed(object_id):
        raise InaccessibleObjectError(f"{object_id} is inside closed {state.inside[object_id]}")
    src = state.positions[object_id]
    to_obj = state.nav.length(state.agent, src)
    if to_obj < 0:
        raise UnreachableObjectError(f"{object_id} unreachable from {state.agent}")
    if dest == src and state.inside[object_id] is None:
        state.agent = src
        return to_obj
    fp = footprint_cells(dest, obj.footprint)
    grid = state.scenario.grid
    if not all(grid.in_bounds(c) and grid.tag(c) == SURFACE for c in fp):
        raise DestinationOccupiedError(f"{dest} is not a free surface for {object_id}")
    if fp & state.occupied(exclude=object_id):
        raise DestinationOccupiedError(f"{dest} overlaps another object")
    to_dest = state.nav.length(src, dest)
    if to_dest < 0:
        raise UnreachableObjectError(f"{dest} unreachable from {src}")
    state.positions[object_id] = dest
    state.inside[object_id] = None
    state.agent = dest
    return to_obj + to_dest


# ---------------------------------------------------------------------------
# serialization


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "seed": s.seed,
        "grid": {"width": s.grid.width, "height": s.grid.height, "cell_size": s.grid.cell_size, "rows": s.grid.to_rows()},
        "rooms": [{"id": r.id, "kind": r.kind, "cell_region": list(r.cell_region)} for r in s.rooms],
        "receptacles": [
            {
                "id": r.id,
                "label": r.label,
                "room_id": r.room_id,
                "surface_cells": [list(c) for c in r.surface_cells],
                "openable": r.openable,
                "open": r.open,
                "centroid": list(r.centroid),
            }
            for r in s.receptacles
        ],
        "objects": [
            {
                "id": o.id,
                "label": o.label,
                "footprint": list(o.footprint),
                "current_pos": list(o.current_pos),
                "inside": o.inside,
                "goal_pos": list(o.goal_pos),
                "goal_receptacle": o.goal_receptacle,
                "case": o.case,
                "partner": o.partner,
            }
            for o in s.objects
        ],
        "agent_start": list(s.agent_start),
        "counts": {
            "n_visible": s.counts.n_visible,
            "n_partially_occluded": s.counts.n_partially_occluded,
            "n_fully_occluded": s.counts.n_fully_occluded,
            "n_swap": s.counts.n_swap,
            "n_blocked": s.counts.n_blocked,
        },
        "sensing_radius": s.sensing_radius,
    }


def scenario_from_dict(d: Mapping) -> Scenario:
    g = d["grid"]
    grid = GridMap.from_rows(g["rows"], cell_size=float(g["cell_size"]))
    if (grid.width, grid.height) != (g["width"], g["height"]):
        raise ValueError("grid rows disagree with declared size")
    return Scenario(
        seed=int(d["seed"]),
        grid=grid,
        rooms=tuple(Room(r["id"], r["kind"], tuple(r["cell_region"])) for r in d["rooms"]),
        receptacles=tuple(
            Receptacle(
                id=r["id"],
                label=r["label"],
                room_id=r["room_id"],
                surface_cells=tuple(tuple(c) for c in r["surface_cells"]),
                openable=bool(r["openable"]),
                centroid=tuple(r["centroid"]),
                open=bool(r["open"]),
            )
            for r in d["receptacles"]
        ),
        objects=tuple(
            ObjectInstance(
                id=o["id"],
                label=o["label"],
                footprint=tuple(o["footprint"]),
                current_pos=tuple(o["current_pos"]),
                goal_pos=tuple(o["goal_pos"]),
                goal_receptacle=o["goal_receptacle"],
                inside=o.get("inside"),
                case=o.get("case", "static"),
                partner=o.get("partner"),
            )
            for o in d["objects"]
        ),
        agent_start=tuple(d["agent_start"]),
        counts=Counts(**d["counts"]),
        sensing_radius=float(d.get("sensing_radius", 8.0)),
    )


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=1))


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
