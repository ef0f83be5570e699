from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

Cell = tuple[int, int]


def footprint_cells(anchor: Cell, size: tuple[int, int]) -> frozenset[Cell]:
    """Cells covered by a ``size=(w, h)`` rectangle whose top-left cell is ``anchor``."""
    x, y = anchor
    w, h = size
    return frozenset((x + dx, y + dy) for dx in range(w) for dy in range(h))


def rects_intersect(a: Cell, a_size: tuple[int, int], b: Cell, b_size: tuple[int, int]) -> bool:
    """Axis-aligned overlap of two cell rectangles (touching edges do not count)."""
    ax, ay = a
    bx, by = b
    return ax < bx + b_size[0] and bx < ax + a_size[0] and ay < by + b_size[1] and by < ay + a_size[1]


def bresenham(a: Cell, b: Cell) -> list[Cell]:
    x0, y0 = a
    x1, y1 = b
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = [(x0, y0)]
    while (x0, y0) != (x1, y1):
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
        out.append((x0, y0))
    return out


def line_of_sight(walls: np.ndarray, a: Cell, b: Cell) -> bool:
    """True when no wall lies strictly between ``a`` and ``b`` on the rasterized ray.

    The ray is tested in both directions so visibility is symmetric.
    """
    for ray in (bresenham(a, b), bresenham(b, a)):
        if not any(walls[y, x] for x, y in ray[1:-1]):
            return True
    return False


def visible_mask(walls: np.ndarray, origin: Cell, radius: float) -> np.ndarray:
    """Boolean mask of cells seen from ``origin`` within Euclidean ``radius``.

    Only walls block sight. The returned array is shared and read-only.
    """
    return _visible_mask_cached(walls.tobytes(), walls.shape, (int(origin[0]), int(origin[1])), float(radius))


@lru_cache(maxsize=4096)
def _visible_mask_cached(wall_bytes: bytes, shape: tuple[int, int], origin: Cell, radius: float) -> np.ndarray:
    walls = np.frombuffer(wall_bytes, dtype=bool).reshape(shape)
    h, w = shape
    ox, oy = origin
    r = int(math.floor(radius))
    mask = np.zeros(shape, dtype=bool)
    for y in range(max(0, oy - r), min(h, oy + r + 1)):
        for x in range(max(0, ox - r), min(w, ox + r + 1)):
            if (x - ox) ** 2 + (y - oy) ** 2 <= radius * radius and line_of_sight(walls, origin, (x, y)):
                mask[y, x] = True
    mask.setflags(write=False)
    return mask
