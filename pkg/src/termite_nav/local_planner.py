"""Vector-field-histogram local steering plus penetrometer soil vetoes.

A square certainty window follows the robot; range returns increment the
cell containing each hit. The window reduces to a polar obstacle-density
histogram; steering picks a free sector run near the target direction.
Bad-soil readings knock coarse cells out of their nests and paint the
surrounding histogram cells as obstacles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corridor import CorridorState
from .errors import NoFreeSector, PointOutsideGrid
from .terrain import SoilCategory, soil_goodness

TWO_PI = 2.0 * math.pi


def wrap_to_pi(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


@dataclass
class VfhParams:
    h_cell: float = 0.1          # histogram cell size, m
    w_half: float = 5.0          # window half-width, m
    c_max: int = 15              # certainty saturation
    n_sectors: int = 72          # 5 degree sectors
    s_min: int = 3               # minimum free-run width, sectors
    smooth_window: int = 5       # moving-average width, sectors
    threshold: float = 3.0       # polar density threshold
    v_max: float = 0.5
    v_min: float = 0.05
    soil_block_threshold: int = 1   # veto categories with goodness <= this
    r_soil: Optional[float] = None  # veto paint radius; default 1 coarse cell

    @property
    def sector_width(self) -> float:
        return TWO_PI / self.n_sectors


@dataclass(frozen=True)
class SteeringCommand:
    heading: float   # world frame, radians
    speed: float     # m/s, >= 0


@dataclass(frozen=True)
class PenetrometerReading:
    position: tuple[float, float]
    category: SoilCategory


@dataclass(frozen=True)
class RangeScan:
    bearings: np.ndarray   # sensor frame, radians
    ranges: np.ndarray     # meters, capped at max_range
    max_range: float


class HistogramGrid:
    """Robot-centered square certainty window.

    World histogram cell (cx, cy) covers x in [cx*h, (cx+1)*h); the window
    holds cells (origin + index) for indices 0..2K, recentered so the robot
    cell sits at index K.
    """

    def __init__(self, params: VfhParams):
        self.params = params
        self.k = int(round(params.w_half / params.h_cell))
        n = 2 * self.k + 1
        self.c = np.zeros((n, n), dtype=np.int32)
        self.origin = (0, 0)   # (cx, cy) of window index (ix=0, iy=0)

    def robot_cell(self, x: float, y: float) -> tuple[int, int]:
        h = self.params.h_cell
        return (int(math.floor(x / h)), int(math.floor(y / h)))

    def recenter(self, x: float, y: float) -> None:
        """Shift the window so the robot cell is central; cells leaving the
        window are discarded, new cells start at zero."""
        cx, cy = self.robot_cell(x, y)
        new_origin = (cx - self.k, cy - self.k)
        dx = new_origin[0] - self.origin[0]
        dy = new_origin[1] - self.origin[1]
        if dx == 0 and dy == 0:
            return
        n = self.c.shape[0]
        shifted = np.zeros_like(self.c)
        sy0, sy1 = max(dy, 0), n + min(dy, 0)
        sx0, sx1 = max(dx, 0), n + min(dx, 0)
        if sy0 < sy1 and sx0 < sx1:
            shifted[sy0 - dy:sy1 - dy, sx0 - dx:sx1 - dx] = self.c[sy0:sy1, sx0:sx1]
        self.c = shifted
        self.origin = new_origin

    def cell_index(self, x: float, y: float) -> Optional[tuple[int, int]]:
        """Window (iy, ix) for a world point, or None if outside the window."""
        cx, cy = self.robot_cell(x, y)
        ix, iy = cx - self.origin[0], cy - self.origin[1]
        n = self.c.shape[0]
        if 0 <= ix < n and 0 <= iy < n:
            return (iy, ix)
        return None

    def cell_centers(self, iy: np.ndarray, ix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = self.params.h_cell
        return ((self.origin[0] + ix + 0.5) * h, (self.origin[1] + iy + 0.5) * h)


def update_histogram(grid: HistogramGrid, pose, scan: RangeScan) -> HistogramGrid:
    """Increment (saturating) the cell containing each non-max-range hit."""
    x, y, theta = pose
    grid.recenter(x, y)
    bearings = np.asarray(scan.bearings, dtype=float)
    ranges = np.asarray(scan.ranges, dtype=float)
    hit = ranges < scan.max_range - 1e-9
    if not hit.any():
        return grid
    ang = theta + bearings[hit]
    hx = x + ranges[hit] * np.cos(ang)
    hy = y + ranges[hit] * np.sin(ang)
    h = grid.params.h_cell
    ix = np.floor(hx / h).astype(int) - grid.origin[0]
    iy = np.floor(hy / h).astype(int) - grid.origin[1]
    n = grid.c.shape[0]
    inside = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
    np.add.at(grid.c, (iy[inside], ix[inside]), 1)
    np.minimum(grid.c, grid.params.c_max, out=grid.c)
    return grid


def build_polar(grid: HistogramGrid, pose) -> np.ndarray:
    """Polar obstacle density: each cell adds c^2 * (1 - d / w_half) to the
    sector of its bearing; smoothed by a circular moving average."""
    p = grid.params
    x, y = pose[0], pose[1]
    densities = np.zeros(p.n_sectors, dtype=float)
    iy, ix = np.nonzero(grid.c)
    if len(iy) > 0:
        cxs, cys = grid.cell_centers(iy, ix)
        dx = cxs - x
        dy = cys - y
        d = np.hypot(dx, dy)
        keep = d <= p.w_half
        if keep.any():
            m = grid.c[iy[keep], ix[keep]].astype(float) ** 2 * (1.0 - d[keep] / p.w_half)
            sector = (np.floor(np.mod(np.arctan2(dy[keep], dx[keep]), TWO_PI)
                               / p.sector_width).astype(int)) % p.n_sectors
            np.add.at(densities, sector, m)
    return smooth_polar(densities, p.smooth_window)


def smooth_polar(densities: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    out = np.zeros_like(densities)
    for shift in range(-half, half + 1):
        out += np.roll(densities, shift)
    return out / window


def _free_runs(free: np.ndarray) -> list[tuple[int, int]]:
    """Maximal circular runs of True as (start, length)."""
    n = len(free)
    if free.all():
        return [(0, n)]
    if not free.any():
        return []
    runs = []
    idx = 0
    # start scanning at a blocked sector so circular runs are not split
    while free[idx]:
        idx += 1
    for step in range(n):
        k = (idx + step) % n
        if free[k]:
            if runs and (runs[-1][0] + runs[-1][1]) % n == k:
                runs[-1] = (runs[-1][0], runs[-1][1] + 1)
            else:
                runs.append((k, 1))
    return runs


def select_direction(polar: np.ndarray, target_dir: float, threshold: float,
                     params: VfhParams) -> SteeringCommand:
    """Steer toward the free sector run closest to the target direction."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    n = params.n_sectors
    w = params.sector_width
    free = np.asarray(polar) < threshold
    runs = [(s, ln) for (s, ln) in _free_runs(free) if ln >= params.s_min]
    if not runs:
        raise NoFreeSector("no free run of sufficient width")

    target = math.fmod(target_dir, TWO_PI)
    if target < 0:
        target += TWO_PI
    target_sector = int(target // w) % n

    def sector_center(k: int) -> float:
        return ((k % n) + 0.5) * w

    candidates = []
    for start, length in runs:
        members = {(start + t) % n for t in range(length)}
        if target_sector in members or length == n:
            candidates.append((0.0, 0, start, length, None))
            continue
        first, last = start, (start + length - 1) % n
        d_first = wrap_to_pi(sector_center(first) - target)
        d_last = wrap_to_pi(sector_center(last) - target)
        if abs(d_first) <= abs(d_last):
            dist, edge, inward = abs(d_first), first, +1
            ccw = d_first > 0
        else:
            dist, edge, inward = abs(d_last), last, -1
            ccw = d_last > 0
        # ties between runs resolved counterclockwise-first
        candidates.append((dist, 0 if ccw else 1, start, length, (edge, inward)))

    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    dist, _, start, length, edge_info = candidates[0]
    if edge_info is None:
        heading = target_dir
        chosen = target_sector
    else:
        edge, inward = edge_info
        shift = min((params.s_min + 1) // 2, length - 1)
        chosen = (edge + inward * shift) % n
        heading = sector_center(chosen)
    density = float(polar[chosen])
    speed = params.v_max * (1.0 - min(1.0, density / threshold))
    speed = max(params.v_min, speed)
    return SteeringCommand(heading=heading, speed=speed)


def apply_soil_reading(reading: PenetrometerReading, state: CorridorState,
                       grid: HistogramGrid, params: VfhParams) -> bool:
    """Veto navigation over bad soil.

    When the reading's category has goodness <= soil_block_threshold, the
    containing coarse cell of each grid is dropped from its nest and the
    histogram cells within r_soil of the reading are raised to c_max.
    Returns True when anything changed (the replan flag is then set).
    """
    x, y = reading.position
    if not state.dual.contains_point(x, y):
        raise PointOutsideGrid(f"reading position {reading.position} outside bounds")
    if soil_goodness(reading.category) > params.soil_block_threshold:
        return False
    changed = False
    for g, (coarse, nest_map) in enumerate(zip(state.dual.grids, state.nests)):
        cell = coarse.cell_containing(x, y)
        state.vetoed_cells[g].add(cell)
        if nest_map.remove_cell(cell):
            changed = True

    r = params.r_soil if params.r_soil is not None else state.dual.coarse_cell_size
    n = grid.c.shape[0]
    iy, ix = np.mgrid[0:n, 0:n]
    cxs, cys = grid.cell_centers(iy, ix)
    mask = np.hypot(cxs - x, cys - y) <= r
    if (grid.c[mask] < grid.params.c_max).any():
        grid.c[mask] = grid.params.c_max
        changed = True

    if changed:
        state.replan_needed = True
    return changed
