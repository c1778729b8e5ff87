"""Raster renderings: rank maps, nest overlays, and trajectory plots.

All images are plain PGM/PPM so byte-identical output is easy to guarantee
across platforms.
"""

from __future__ import annotations

import numpy as np

from .corridor import CoarseGrid, DualGrid
from .terrain import TerrainGrid

GRID_COLORS = ((220, 40, 40), (40, 80, 220))   # gridA, gridB outlines
PATH_COLOR = (30, 160, 30)
TRACE_COLOR = (30, 60, 230)
CRATE_COLOR = (60, 40, 20)
START_COLOR = (250, 220, 40)
GOAL_COLOR = (250, 120, 20)


def rank_image(grid: TerrainGrid) -> np.ndarray:
    """Grayscale rank map: rank 2 -> 0, rank 10 -> 255, linear."""
    return np.round((grid.rank - 2) * (255.0 / 8.0)).astype(np.uint8)


def _rank_rgb(grid: TerrainGrid, scale: int) -> np.ndarray:
    gray = np.kron(rank_image(grid), np.ones((scale, scale), dtype=np.uint8))
    return np.stack([gray, gray, gray], axis=-1)


def _draw_px(img: np.ndarray, px: int, py: int, color) -> None:
    if 0 <= py < img.shape[0] and 0 <= px < img.shape[1]:
        img[py, px] = color


def draw_line(img: np.ndarray, x0: int, y0: int, x1: int, y1: int, color,
              dotted: bool = False) -> None:
    """Bresenham line; dotted draws every other pixel."""
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    count = 0
    while True:
        if not dotted or count % 2 == 0:
            _draw_px(img, x0, y0, color)
        count += 1
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def draw_rect_outline(img: np.ndarray, x0: int, y0: int, x1: int, y1: int,
                      color) -> None:
    draw_line(img, x0, y0, x1, y0, color)
    draw_line(img, x1, y0, x1, y1, color)
    draw_line(img, x1, y1, x0, y1, color)
    draw_line(img, x0, y1, x0, y0, color)


def fill_rect(img: np.ndarray, x0: int, y0: int, x1: int, y1: int, color) -> None:
    x0, x1 = max(0, min(x0, x1)), min(img.shape[1] - 1, max(x0, x1))
    y0, y1 = max(0, min(y0, y1)), min(img.shape[0] - 1, max(y0, y1))
    img[y0:y1 + 1, x0:x1 + 1] = color


def _to_px(x: float, y: float, meters_per_px: float) -> tuple[int, int]:
    return int(round(x / meters_per_px)), int(round(y / meters_per_px))


def nest_overlay(grid: TerrainGrid, dual: DualGrid, nests,
                 scale: int = 8) -> np.ndarray:
    """Rank-map background with nest cells outlined, one color per grid."""
    img = _rank_rgb(grid, scale)
    mpp = grid.cell_size_m / scale
    for coarse, nest_map, color in zip(dual.grids, nests, GRID_COLORS):
        for (i, j) in sorted(nest_map.cell_to_nest):
            x0, y0, x1, y1 = coarse.cell_span(i, j)
            px0, py0 = _to_px(x0, y0, mpp)
            px1, py1 = _to_px(x1, y1, mpp)
            draw_rect_outline(img, max(px0, 0), max(py0, 0),
                              min(px1, img.shape[1] - 1),
                              min(py1, img.shape[0] - 1), color)
    return img


def trajectory_image(grid: TerrainGrid, waypoints, trace_points, crates=(),
                     start=None, goal=None, scale: int = 8) -> np.ndarray:
    """Global path (solid) and executed trajectory (dotted) over the rank map."""
    img = _rank_rgb(grid, scale)
    mpp = grid.cell_size_m / scale
    for crate in crates:
        px0, py0 = _to_px(crate.min_x, crate.min_y, mpp)
        px1, py1 = _to_px(crate.max_x, crate.max_y, mpp)
        fill_rect(img, px0, py0, px1, py1, CRATE_COLOR)
    pts = [_to_px(x, y, mpp) for (x, y) in waypoints]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        draw_line(img, x0, y0, x1, y1, PATH_COLOR)
    tps = [_to_px(x, y, mpp) for (x, y) in trace_points]
    for (x0, y0), (x1, y1) in zip(tps, tps[1:]):
        draw_line(img, x0, y0, x1, y1, TRACE_COLOR, dotted=True)
    for point, color in ((start, START_COLOR), (goal, GOAL_COLOR)):
        if point is not None:
            px, py = _to_px(point[0], point[1], mpp)
            fill_rect(img, px - 1, py - 1, px + 1, py + 1, color)
    return img
