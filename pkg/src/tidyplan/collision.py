"""Pairwise collision cases between misplaced objects and buffer search for swaps.

Each visible object is a box on the free-receptacle map. For a pair (i, j):

* (i) i's current box overlaps j's box moved to j's goal: i blocks j;
* (ii) i's box moved to i's goal overlaps j's current box: j blocks i.

One condition is a blocked goal, both are a swap. Swaps are broken by moving
one object to a temporary buffer found with the cross-entropy method.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Cell, footprint_cells, rects_intersect

NONE, BLOCKED_GOAL, SWAP = "none", "blocked_goal", "swap"


class NoFeasibleCellError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProjectedBox:
    origin: Cell
    width: int = 1
    height: int = 1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"box size must be positive, got {self.width}x{self.height}")

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def cells(self) -> frozenset[Cell]:
        return footprint_cells(self.origin, self.size)

    def moved_to(self, cell: Cell) -> "ProjectedBox":
        return ProjectedBox(tuple(cell), self.width, self.height)

    def intersects(self, other: "ProjectedBox") -> bool:
        return rects_intersect(self.origin, self.size, other.origin, other.size)


@dataclass(frozen=True)
class CollisionCase:
    """``blocked_goal``: (first=blocked, second=blocker). ``swap``: ids in sorted order."""

    kind: str = NONE
    first: str | None = None
    second: str | None = None

    @property
    def blocked(self) -> str | None:
        return self.first if self.kind == BLOCKED_GOAL else None

    @property
    def blocker(self) -> str | None:
        return self.second if self.kind == BLOCKED_GOAL else None


def classify_pair(box_i: ProjectedBox, box_j: ProjectedBox, goal_i: Cell, goal_j: Cell, ids: tuple[str, str] = ("i", "j")) -> CollisionCase:
    i, j = ids
    i_blocks_j = box_i.intersects(box_j.moved_to(goal_j))
    j_blocks_i = box_i.moved_to(goal_i).intersects(box_j)
    if i_blocks_j and j_blocks_i:
        a, b = sorted((i, j))
        return CollisionCase(SWAP, a, b)
    if i_blocks_j:
        return CollisionCase(BLOCKED_GOAL, j, i)
    if j_blocks_i:
        return CollisionCase(BLOCKED_GOAL, i, j)
    return CollisionCase()


# ---------------------------------------------------------------------------
# buffer search


@dataclass(frozen=True)
class CemParams:
    n_samples: int = 64
    n_elite: int = 8
    iterations: int = 10
    std_floor: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n_elite <= self.n_samples:
            raise ValueError("need 1 <= n_elite <= n_samples")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")


def _feasible(cell: Cell, size: tuple[int, int], target: ProjectedBox, free: np.ndarray) -> bool:
    x, y = cell
    w, h = size
    H, W = free.shape
    if x < 0 or y < 0 or x + w > W or y + h > H:
        return False
    if not free[y : y + h, x : x + w].all():
        return False
    return not rects_intersect(cell, size, target.origin, target.size)


def cem_objective(p: Cell, moving: ProjectedBox, target: ProjectedBox, free: np.ndarray) -> float:
    """exp(-distance to the target anchor) if the moved box fits in free space clear of the target, else 0."""
    if not _feasible(tuple(p), moving.size, target, free):
        return 0.0
    return math.exp(-math.hypot(p[0] - target.origin[0], p[1] - target.origin[1]))


def fit_mask(free: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Anchors whose ``size`` box lies entirely in free cells."""
    w, h = size
    H, W = free.shape
    out = np.zeros_like(free, dtype=bool)
    if w > W or h > H:
        return out
    acc = np.ones((H - h + 1, W - w + 1), dtype=bool)
    for dy in range(h):
        for dx in range(w):
            acc &= free[dy : dy + H - h + 1, dx : dx + W - w + 1]
    out[: H - h + 1, : W - w + 1] = acc
    return out


def exhaustive_best(moving: ProjectedBox, target: ProjectedBox, free: np.ndarray) -> tuple[Cell | None, float]:
    """Scan every cell; the best (cell, score) with ties to the lowest (y, x)."""
    best, best_f = None, 0.0
    H, W = free.shape
    for y in range(H):
        for x in range(W):
            f = cem_objective((x, y), moving, target, free)
            if f > best_f:
                best, best_f = (x, y), f
    return best, best_f


def cem_search(moving: ProjectedBox, target: ProjectedBox, free: np.ndarray, params: CemParams = CemParams(), seed: int = 0) -> Cell:
    """Cross-entropy search for a buffer anchor near ``target``.

    Starts from a uniform draw over free anchors (cells where the moving box
    fits in free space), refits an axis-aligned Gaussian
    to the elite samples each round, and returns the best sample ever scored.
    Falls back to an exhaustive scan when no sample was feasible.
    """
    rng = np.random.default_rng(seed)
    H, W = free.shape
    free_cells = np.argwhere(fit_mask(free, moving.size))
    if len(free_cells) == 0:
        raise NoFeasibleCellError("no free anchor fits the box")
    pts = free_cells[rng.integers(len(free_cells), size=params.n_samples)][:, ::-1].astype(float)
    best, best_f = None, 0.0
    elite_cells, elite_f = np.zeros((0, 2), dtype=int), np.zeros(0)
    for _ in range(params.iterations):
        cells = np.column_stack([np.clip(np.rint(pts[:, 0]), 0, W - 1), np.clip(np.rint(pts[:, 1]), 0, H - 1)]).astype(int)
        scores = np.array([cem_objective((int(x), int(y)), moving, target, free) for x, y in cells])
        k = int(np.argmax(scores))
        if scores[k] > best_f:
            best, best_f = (int(cells[k, 0]), int(cells[k, 1])), float(scores[k])
        # elitist refit: last round's elites compete with the new samples
        pool = np.vstack([elite_cells, cells])
        pool_f = np.concatenate([elite_f, scores])
        order = np.argsort(-pool_f, kind="stable")[: params.n_elite]
        order = order[pool_f[order] > 0]
        elite_cells, elite_f = pool[order], pool_f[order]
        elite = elite_cells
        if len(elite) == 0:
            pts = free_cells[rng.integers(len(free_cells), size=params.n_samples)][:, ::-1].astype(float)
            continue
        mu = elite.mean(axis=0)
        std = np.maximum(elite.std(axis=0), params.std_floor)
        pts = rng.normal(mu, std, size=(params.n_samples, 2))
    if best is None:
        best, best_f = exhaustive_best(moving, target, free)
        if best is None:
            raise NoFeasibleCellError("no cell can hold the buffer")
    return best


def pair_seed(seed: int, *parts: str) -> int:
    h = hashlib.blake2b(":".join([str(seed), *parts]).encode(), digest_size=8).digest()
    return int.from_bytes(h, "little")


# ---------------------------------------------------------------------------
# belief-level resolution


def _box(knowledge, oid: str) -> ProjectedBox:
    w, h = knowledge.goals[oid].footprint
    return ProjectedBox(knowledge.visible[oid], w, h)


def find_cases(knowledge) -> list[CollisionCase]:
    """All blocked-goal and swap cases among observed, out-of-container, misplaced objects."""
    ids = sorted(oid for oid in knowledge.visible if oid not in knowledge.contained and knowledge.is_misplaced(oid))
    out = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            i, j = ids[a], ids[b]
            case = classify_pair(_box(knowledge, i), _box(knowledge, j), knowledge.goals[i].goal_pos, knowledge.goals[j].goal_pos, (i, j))
            if case.kind != NONE:
                out.append(case)
    return out


def buffer_free_map(knowledge, extra: frozenset[Cell] = frozenset()) -> np.ndarray:
    """Known free receptacle cells minus every goal footprint still owed to a misplaced object."""
    free = knowledge.free_map.copy()
    for oid, spec in knowledge.goals.items():
        if knowledge.is_misplaced(oid):
            for x, y in footprint_cells(spec.goal_pos, spec.footprint):
                free[y, x] = False
    for x, y in extra:
        free[y, x] = False
    return free


def _buffer_for(knowledge, oid: str, near: ProjectedBox, taken: frozenset[Cell], params: CemParams, seed: int) -> Cell:
    free = buffer_free_map(knowledge, taken)
    return cem_search(_box(knowledge, oid), near, free, params, seed)


def _committed_buffers(knowledge) -> frozenset[Cell]:
    """Footprints of every buffer handed out so far, so different pairs never share one."""
    cells: set[Cell] = set()
    for key, val in knowledge.buffers.items():
        if key[0] == "cycle":
            oid, anchor = key[1], val[0]
            cells |= footprint_cells(anchor, knowledge.goals[oid].footprint)
        else:
            for oid, anchor in val.items():
                cells |= footprint_cells(anchor, knowledge.goals[oid].footprint)
    return frozenset(cells)


def _cycles(blocker_of: dict[str, str]) -> list[list[str]]:
    seen: set[str] = set()
    cycles = []
    for start in sorted(blocker_of):
        path: list[str] = []
        node = start
        while node in blocker_of and node not in seen and node not in path:
            path.append(node)
            node = blocker_of[node]
        if node in path:
            cycles.append(path[path.index(node) :])
        seen.update(path)
    return cycles


def resolve_collisions(knowledge, params: CemParams = CemParams(), seed: int = 0) -> list[CollisionCase]:
    """Recompute resolved goals from scratch; returns the cases found.

    Swap pairs get buffer cells (cached in ``knowledge.buffers`` so they stay
    put across iterations): i's buffer is sought near j's current cell, and the
    second buffer treats the first as occupied. A blocked object is pinned to
    its current cell until its blocker moves. Blocking cycles longer than two
    are broken by buffering their lowest id. A swap with no feasible buffer in
    the known free space is left pending (both objects pinned) and retried on
    the next call.
    """
    cases = find_cases(knowledge)
    knowledge.resolved_goals = {}
    knowledge.pending_buffers = set()
    blocker_of: dict[str, str] = {}
    for case in cases:
        if case.kind == BLOCKED_GOAL:
            # with several blockers, the lowest id is kept for cycle detection
            blocker_of.setdefault(case.blocked, case.blocker)
            knowledge.resolved_goals[case.blocked] = knowledge.visible[case.blocked]
    for case in cases:
        if case.kind != SWAP:
            continue
        i, j = case.first, case.second
        key = (i, j)
        if key not in knowledge.buffers:
            taken = _committed_buffers(knowledge)
            try:
                bi = _buffer_for(knowledge, i, _box(knowledge, j), taken, params, pair_seed(seed, i, j))
                fp_i = footprint_cells(bi, knowledge.goals[i].footprint)
                bj = _buffer_for(knowledge, j, _box(knowledge, i), taken | fp_i, params, pair_seed(seed, j, i))
            except NoFeasibleCellError:
                # no known space yet: both wait in place until more surface has been sensed
                knowledge.pending_buffers.add(key)
                for oid in (i, j):
                    knowledge.resolved_goals[oid] = knowledge.visible[oid]
                continue
            knowledge.buffers[key] = {i: bi, j: bj}
        for oid in (i, j):
            knowledge.resolved_goals[oid] = knowledge.buffers[key][oid]
    for cycle in _cycles(blocker_of):
        if len(cycle) < 3:
            continue
        c = min(cycle)
        key = ("cycle", c)
        if key not in knowledge.buffers or knowledge.buffers[key][1] != knowledge.visible[c]:
            taken = _committed_buffers(knowledge)
            cell = _buffer_for(knowledge, c, _box(knowledge, c), taken, params, pair_seed(seed, "cycle", c))
            knowledge.buffers[key] = (cell, knowledge.visible[c])
        knowledge.resolved_goals[c] = knowledge.buffers[key][0]
    return cases


def is_temporarily_static(knowledge, oid: str) -> bool:
    """A visible misplaced object pinned to where it already is."""
    return oid in knowledge.resolved_goals and oid in knowledge.visible and knowledge.resolved_goals[oid] == knowledge.visible[oid]
