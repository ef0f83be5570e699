from __future__ import annotations

import heapq

import numpy as np
import pytest

from tidyplan.uodm import train_uodm


@pytest.fixture(scope="session")
def uodm_model():
    model, _ = train_uodm()
    return model


@pytest.fixture(scope="session")
def uodm_trained():
    return train_uodm()


def dijkstra_length(free: np.ndarray, walls: np.ndarray, start, goal) -> int:
    """Unit-weight Dijkstra: leave ``start``, move through free cells, step onto ``goal`` last."""
    h, w = free.shape
    sx, sy = start
    gx, gy = goal
    if walls[sy, sx] or walls[gy, gx]:
        return -1
    if start == goal:
        return 0
    best = {start: 0}
    heap = [(0, start)]
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if d > best[(x, y)]:
            continue
        if (x, y) == goal:
            return d
        if (x, y) != start and not free[y, x]:
            continue
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            if not free[ny, nx] and (nx, ny) != goal:
                continue
            if d + 1 < best.get((nx, ny), 1 << 30):
                best[(nx, ny)] = d + 1
                heapq.heappush(heap, (d + 1, (nx, ny)))
    return -1


def random_map(rng: np.random.Generator, w: int, h: int, p_wall: float = 0.2, p_block: float = 0.1):
    """Free/wall/obstacle mask pair: walls block everything, obstacles only block passing through."""
    u = rng.random((h, w))
    walls = u < p_wall
    free = u >= p_wall + p_block
    return free, walls


TINY_ROWS = [
    "##########",
    "#........#",
    "#.ssssss.#",
    "#........#",
    "#.iii....#",
    "#........#",
    "##########",
]


def tiny_scenario(objects, agent=(1, 1), fridge_open=False, seed=0, radius=8.0):
    """One room with a 6x1 table (``rec00``) and a 3x1 closed fridge (``rec01``).

    ``objects`` are (id, label, current, goal, inside) tuples with 1x1 footprints.
    """
    from tidyplan.gridworld import Counts, GridMap, ObjectInstance, Receptacle, Room, Scenario

    grid = GridMap.from_rows(TINY_ROWS)
    table = Receptacle("rec00", "kitchen|table", "room0", tuple((x, 2) for x in range(2, 8)), False, (4, 2))
    fridge = Receptacle("rec01", "kitchen|fridge", "room0", tuple((x, 4) for x in range(2, 5)), True, (3, 4), open=fridge_open)
    objs = tuple(
        ObjectInstance(oid, label, (1, 1), tuple(cur), tuple(goal), "rec00", inside=inside, case="visible")
        for oid, label, cur, goal, inside in objects
    )
    counts = Counts(len(objs), 0, sum(o.inside is not None for o in objs), 0)
    return Scenario(seed, grid, (Room("room0", "kitchen", (1, 1, 8, 5)),), (table, fridge), objs, tuple(agent), counts, radius)


def raster(origin, size):
    return {(origin[0] + dx, origin[1] + dy) for dx in range(size[0]) for dy in range(size[1])}


def raster_classify(oi, si, oj, sj, gi, gj):
    """Collision kind from explicit cell sets: 'none', 'blocked_goal' or 'swap'."""
    c1 = bool(raster(oi, si) & raster(gj, sj))
    c2 = bool(raster(gi, si) & raster(oj, sj))
    return "swap" if c1 and c2 else "blocked_goal" if c1 or c2 else "none"


def raster_best_score(free: np.ndarray, size, target_origin, target_size) -> float:
    """Exhaustive buffer optimum from cell sets: max exp(-dist) over fitting, non-overlapping anchors."""
    h, w = free.shape
    blocked = raster(target_origin, target_size)
    free_cells = {(int(x), int(y)) for y, x in zip(*np.nonzero(free))}
    best = 0.0
    for y in range(h):
        for x in range(w):
            cells = raster((x, y), size)
            if cells <= free_cells and not (cells & blocked):
                best = max(best, float(np.exp(-np.hypot(x - target_origin[0], y - target_origin[1]))))
    return best


def buffer_scene(rng: np.random.Generator):
    """Receptacle surfaces of a random floorplan with ~30% of cells taken, a box to move, and a target box."""
    from tidyplan.collision import ProjectedBox
    from tidyplan.gridworld import SURFACE, build_floorplan

    grid, _, _ = build_floorplan(11, rng)
    free = grid.cells == SURFACE
    cells = np.argwhere(free)
    for y, x in cells[rng.random(len(cells)) < 0.3]:
        free[y, x] = False
    size = (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    ty, tx = cells[rng.integers(len(cells))]
    return free, ProjectedBox((0, 0), *size), ProjectedBox((int(tx), int(ty)), *size)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
