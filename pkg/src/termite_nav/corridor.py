"""Swathe construction and the two overlapping coarse grids.

The swathe is the band of fine cells within a half-width of the start-goal
segment. Two coarse grids (cell edge = 4x robot size) are laid over the
swathe, the second offset by a quarter coarse cell in both axes; navigability
is checked against both, OR-wise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator

import numpy as np

from .errors import DegenerateEndpoints, EmptySwathe, PointOutsideGrid
from .terrain import TerrainGrid

if TYPE_CHECKING:
    from .swarm import NestMap

Point = tuple[float, float]


@dataclass(frozen=True)
class Swathe:
    member_cells: frozenset
    half_width: float


def point_segment_distance(px, py, ax, ay, bx, by) -> float:
    """Euclidean distance from point P to segment AB."""
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * abx + (py - ay) * aby) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * abx), py - (ay + t * aby))


def build_swathe(grid: TerrainGrid, start: Point, goal: Point,
                 half_width: float) -> Swathe:
    """Select fine cells whose centers lie within half_width of the segment."""
    if start == goal:
        raise DegenerateEndpoints("start and goal coincide")
    for name, (x, y) in (("start", start), ("goal", goal)):
        if not grid.contains_point(x, y):
            raise PointOutsideGrid(f"{name} {x, y} outside terrain bounds")
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    s = grid.cell_size_m
    cx = (np.arange(grid.cols) + 0.5) * s
    cy = (np.arange(grid.rows) + 0.5) * s
    xs, ys = np.meshgrid(cx, cy)
    ax, ay = start
    bx, by = goal
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    t = np.clip(((xs - ax) * abx + (ys - ay) * aby) / denom, 0.0, 1.0)
    dist = np.hypot(xs - (ax + t * abx), ys - (ay + t * aby))
    members = {(int(r), int(c)) for r, c in zip(*np.nonzero(dist <= half_width))}
    # start and goal cells are always members
    members.add(grid.cell_containing(*start))
    members.add(grid.cell_containing(*goal))
    return Swathe(member_cells=frozenset(members), half_width=half_width)


@dataclass
class CoarseGrid:
    """One coarse grid over the swathe.

    Cell (i, j) spans x in [offset + j*cs, offset + (j+1)*cs) and likewise
    for y with row index i. Raw indices may start at -1 when offset > 0 so
    the strip below the offset is still covered; arrays are indexed by
    (i - i_min, j - j_min).
    """

    offset: float
    cell_size: float
    i_min: int
    j_min: int
    ranks: np.ndarray       # aggregated (min) fine rank; 0 where outside swathe
    in_swathe: np.ndarray   # bool: covers at least one swathe fine cell

    @property
    def n_rows(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_cols(self) -> int:
        return self.ranks.shape[1]

    def cell_containing(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((y - self.offset) / self.cell_size)),
                int(math.floor((x - self.offset) / self.cell_size)))

    def contains_cell(self, i: int, j: int) -> bool:
        return (self.i_min <= i < self.i_min + self.n_rows
                and self.j_min <= j < self.j_min + self.n_cols)

    def rank_at(self, i: int, j: int) -> int:
        return int(self.ranks[i - self.i_min, j - self.j_min])

    def swathe_at(self, i: int, j: int) -> bool:
        return bool(self.in_swathe[i - self.i_min, j - self.j_min])

    def center(self, i: int, j: int) -> Point:
        return (self.offset + (j + 0.5) * self.cell_size,
                self.offset + (i + 0.5) * self.cell_size)

    def cell_span(self, i: int, j: int) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) of the half-open cell rectangle."""
        cs = self.cell_size
        return (self.offset + j * cs, self.offset + i * cs,
                self.offset + (j + 1) * cs, self.offset + (i + 1) * cs)

    def iter_swathe_cells(self) -> Iterator[tuple[int, int]]:
        for a, b in zip(*np.nonzero(self.in_swathe)):
            yield (int(a) + self.i_min, int(b) + self.j_min)


@dataclass
class DualGrid:
    grid_a: CoarseGrid
    grid_b: CoarseGrid
    robot_size: float
    width_m: float
    height_m: float

    @property
    def coarse_cell_size(self) -> float:
        return self.grid_a.cell_size

    @property
    def grids(self) -> tuple[CoarseGrid, CoarseGrid]:
        return (self.grid_a, self.grid_b)

    def contains_point(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width_m and 0.0 <= y < self.height_m


def _index_range(x0: float, x1: float, offset: float, cs: float) -> range:
    """Raw coarse indices whose cells overlap [x0, x1) with positive length."""
    lo = int(math.floor((x0 - offset) / cs))
    hi = int(math.ceil((x1 - offset) / cs)) - 1
    return range(lo, hi + 1)


def _build_coarse(grid: TerrainGrid, swathe: Swathe, offset: float,
                  cs: float) -> CoarseGrid:
    i_min = int(math.floor((0.0 - offset) / cs))
    j_min = i_min
    i_max = int(math.ceil((grid.height_m - offset) / cs)) - 1
    j_max = int(math.ceil((grid.width_m - offset) / cs)) - 1
    n_rows = i_max - i_min + 1
    n_cols = j_max - j_min + 1
    ranks = np.zeros((n_rows, n_cols), dtype=np.int64)
    agg = np.full((n_rows, n_cols), 99, dtype=np.int64)
    in_swathe = np.zeros((n_rows, n_cols), dtype=bool)
    s = grid.cell_size_m
    for (r, c) in swathe.member_cells:
        fine_rank = int(grid.rank[r, c])
        for i in _index_range(r * s, (r + 1) * s, offset, cs):
            for j in _index_range(c * s, (c + 1) * s, offset, cs):
                if i_min <= i <= i_max and j_min <= j <= j_max:
                    ii, jj = i - i_min, j - j_min
                    in_swathe[ii, jj] = True
                    if fine_rank < agg[ii, jj]:
                        agg[ii, jj] = fine_rank
    ranks[in_swathe] = agg[in_swathe]
    return CoarseGrid(offset=offset, cell_size=cs, i_min=i_min, j_min=j_min,
                      ranks=ranks, in_swathe=in_swathe)


def build_dual_grids(grid: TerrainGrid, swathe: Swathe,
                     robot_size: float) -> DualGrid:
    """Aggregate the swathe into two overlapping coarse grids."""
    if robot_size <= 0:
        raise ValueError("robot_size must be positive")
    if not swathe.member_cells:
        raise EmptySwathe("swathe has no member cells")
    cs = 4.0 * robot_size
    return DualGrid(
        grid_a=_build_coarse(grid, swathe, 0.0, cs),
        grid_b=_build_coarse(grid, swathe, cs / 4.0, cs),
        robot_size=robot_size,
        width_m=grid.width_m,
        height_m=grid.height_m,
    )


def navigable_at(dual: DualGrid, nests, p: Point) -> bool:
    """True iff p lies in a nest cell of either coarse grid."""
    x, y = p
    if not dual.contains_point(x, y):
        raise PointOutsideGrid(f"point {p} outside terrain bounds")
    for g, nest_map in zip(dual.grids, nests):
        cell = g.cell_containing(x, y)
        if nest_map.contains(cell):
            return True
    return False


@dataclass
class CorridorState:
    """Mutable planning state shared by the local planner and the sim loop."""

    dual: DualGrid
    nests: tuple
    replan_needed: bool = False
    vetoed_cells: tuple[set, set] = field(default_factory=lambda: (set(), set()))


def dual_grid_json(dual: DualGrid) -> str:
    def cells(g: CoarseGrid):
        out = []
        for i in range(g.i_min, g.i_min + g.n_rows):
            for j in range(g.j_min, g.j_min + g.n_cols):
                out.append({"i": i, "j": j, "rank": g.rank_at(i, j),
                            "inSwathe": g.swathe_at(i, j)})
        return out

    doc = {
        "robotSize": dual.robot_size,
        "coarseCellSize": dual.coarse_cell_size,
        "offsets": [dual.grid_a.offset, dual.grid_b.offset],
        "grids": [cells(dual.grid_a), cells(dual.grid_b)],
    }
    return json.dumps(doc, sort_keys=True)
