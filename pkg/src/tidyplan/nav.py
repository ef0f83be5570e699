"""Shortest paths on the occupancy grid.

Every distance, edge cost and traversal length in the package comes from here.
Paths are 4-connected with unit step cost. Intermediate cells must be free;
the two endpoints may be non-free (a receptacle surface or container cell),
in which case the final step onto them from an adjacent free cell is counted.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

Cell = tuple[int, int]

NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class PathResult:
    length: int
    cells: tuple[Cell, ...]
    reachable: bool


class DistanceField:
    """BFS distances from one start cell over the free cells of a grid."""

    def __init__(self, free: np.ndarray, start: Cell, walls: np.ndarray | None = None):
        self.free = free
        self.walls = walls
        self.start = start
        h, w = free.shape
        dist = np.full((h, w), -1, dtype=np.int64)
        parent = np.full((h, w, 2), -1, dtype=np.int64)
        sx, sy = start
        queue = deque()
        if walls is None or not walls[sy, sx]:
            dist[sy, sx] = 0
            queue.append(start)
        while queue:
            x, y = queue.popleft()
            d = dist[y, x]
            for dx, dy in NEIGHBOURS:
                nx, ny = x + dx, y + dy
                if 0 <= nx < w and 0 <= ny < h and dist[ny, nx] < 0 and free[ny, nx]:
                    dist[ny, nx] = d + 1
                    parent[ny, nx] = (x, y)
                    queue.append((nx, ny))
        self.dist = dist
        self.parent = parent

    def _entry(self, target: Cell) -> tuple[int, Cell | None]:
        """Distance to ``target`` and the free cell the path enters it from."""
        tx, ty = target
        sx, sy = self.start
        if self.dist[sy, sx] < 0 or (self.walls is not None and self.walls[ty, tx]):
            return -1, None
        if target == self.start:
            return 0, None
        if self.free[ty, tx]:
            d = int(self.dist[ty, tx])
            return d, None
        h, w = self.free.shape
        best, via = -1, None
        for dx, dy in NEIGHBOURS:
            nx, ny = tx + dx, ty + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            if (nx, ny) == self.start:
                return 1, (nx, ny)
            if self.free[ny, nx] and self.dist[ny, nx] >= 0:
                d = int(self.dist[ny, nx]) + 1
                if best < 0 or d < best:
                    best, via = d, (nx, ny)
        return best, via

    def length(self, target: Cell) -> int:
        """Path length in cells, or -1 when unreachable."""
        return self._entry(target)[0]

    def path(self, target: Cell) -> PathResult:
        d, via = self._entry(target)
        if d < 0:
            return PathResult(length=-1, cells=(), reachable=False)
        cells = [target]
        cur = via if via is not None else target
        if via is not None:
            cells.append(via)
        while cur != self.start:
            px, py = self.parent[cur[1], cur[0]]
            cur = (int(px), int(py))
            cells.append(cur)
        cells.reverse()
        return PathResult(length=d, cells=tuple(cells), reachable=True)


class Navigator:
    """Caches distance fields per start cell; the free mask never changes during an episode."""

    def __init__(self, free: np.ndarray, walls: np.ndarray | None = None):
        self.free = np.asarray(free, dtype=bool)
        self.walls = None if walls is None else np.asarray(walls, dtype=bool)
        self._fields: dict[Cell, DistanceField] = {}

    def field(self, start: Cell) -> DistanceField:
        f = self._fields.get(start)
        if f is None:
            f = DistanceField(self.free, start, self.walls)
            self._fields[start] = f
        return f

    def length(self, a: Cell, b: Cell) -> int:
        return self.field(a).length(b)

    def path(self, a: Cell, b: Cell) -> PathResult:
        return self.field(a).path(b)


def shortest_path(
    free: np.ndarray, start: Cell, goal: Cell, walls: np.ndarray | None = None
) -> PathResult:
    """BFS-optimal 4-connected path from ``start`` to ``goal``.

    ``free`` is a boolean (height, width) mask of navigable cells; cells set in
    ``walls`` can never be endpoints. An unreachable goal is reported with
    ``reachable=False`` and length -1.
    """
    h, w = free.shape
    for x, y in (start, goal):
        if not (0 <= x < w and 0 <= y < h):
            raise ValueError(f"cell {(x, y)} outside {w}x{h} map")
    return DistanceField(np.asarray(free, dtype=bool), start, walls).path(goal)
