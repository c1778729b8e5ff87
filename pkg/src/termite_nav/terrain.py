"""Terrain database: heightmap ingestion, sub-sampling, goodness values, rank.

A terrain cell's rank is the sum of its soil goodness and gradient goodness,
so ranks span [2, 10]. Gradient goodness maps the worst height difference to
any Moore neighbor through a symmetric piecewise-constant band table.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple, Optional, TextIO, Union

import numpy as np

from . import raster
from .errors import (
    DimensionMismatch,
    EmptyImage,
    IndexOutOfBounds,
    OutOfRange,
    UnknownCatValue,
)


class SoilCategory(Enum):
    GRAVEL = "Gravel"
    SAND = "Sand"
    CLAY = "Clay"
    SILT = "Silt"
    ROCK = "Rock"


#: Goodness per soil category. Silt is 3 by the formal table even though the
#: prose ordering would suggest 2; override via the soil_table arguments.
DEFAULT_SOIL_GOODNESS: dict[SoilCategory, int] = {
    SoilCategory.GRAVEL: 5,
    SoilCategory.SAND: 4,
    SoilCategory.CLAY: 3,
    SoilCategory.SILT: 3,
    SoilCategory.ROCK: 1,
}

# Upper bounds (inclusive) of the |height difference| bands mapping to
# goodness 5, 4, 3, 2, 1. The published band table leaves 127-129 unassigned
# and assigns -192 twice; the bands below are the minimal repair that makes
# the map total and sign-symmetric on [-255, 255].
_BAND_EDGES = (0, 66, 129, 192, 255)


@dataclass(frozen=True)
class HeightMap:
    """8-bit grayscale heightmap; values[row, col] in [0, 255]."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise EmptyImage("heightmap must have at least one pixel")
        if self.values.shape != (self.height, self.width):
            raise DimensionMismatch("values shape disagrees with width/height")


class TerrainCell(NamedTuple):
    height_value: int
    soil: SoilCategory
    gradient_goodness: int
    soil_goodness: int
    rank: int


@dataclass(frozen=True)
class TerrainGrid:
    """Sub-sampled terrain with per-cell goodness values and rank.

    World coordinates: x runs along columns, y along rows; fine cell (r, c)
    covers [c*s, (c+1)*s) x [r*s, (r+1)*s) with s = cell_size_m.
    """

    rows: int
    cols: int
    cell_size_m: float
    heights: np.ndarray         # int, block-averaged height values
    soil: np.ndarray            # object array of SoilCategory
    gradient_goodness: np.ndarray
    soil_goodness: np.ndarray
    rank: np.ndarray

    @property
    def width_m(self) -> float:
        return self.cols * self.cell_size_m

    @property
    def height_m(self) -> float:
        return self.rows * self.cell_size_m

    def contains_point(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width_m and 0.0 <= y < self.height_m

    def cell_containing(self, x: float, y: float) -> tuple[int, int]:
        return int(y // self.cell_size_m), int(x // self.cell_size_m)

    def cell(self, r: int, c: int) -> TerrainCell:
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexOutOfBounds(f"cell ({r}, {c}) outside {self.rows}x{self.cols}")
        return TerrainCell(
            int(self.heights[r, c]),
            self.soil[r, c],
            int(self.gradient_goodness[r, c]),
            int(self.soil_goodness[r, c]),
            int(self.rank[r, c]),
        )


def load_heightmap(source: raster.Source) -> HeightMap:
    """Decode a binary 8-bit PGM stream into a HeightMap."""
    values = raster.read_pgm(source)
    return HeightMap(width=values.shape[1], height=values.shape[0], values=values)


def subsample(hm: HeightMap, block_w: int = 4, block_h: int = 2) -> np.ndarray:
    """Block-average the heightmap, round-half-up to the nearest integer.

    Partial blocks at the right/bottom edges average over the pixels present.
    """
    if block_w < 1 or block_h < 1:
        raise ValueError("block dimensions must be >= 1")
    if hm.width < 1 or hm.height < 1:
        raise EmptyImage("cannot subsample an empty image")
    out_rows = -(-hm.height // block_h)
    out_cols = -(-hm.width // block_w)
    out = np.zeros((out_rows, out_cols), dtype=np.int64)
    values = hm.values.astype(np.int64)
    for r in range(out_rows):
        for c in range(out_cols):
            block = values[r * block_h:(r + 1) * block_h, c * block_w:(c + 1) * block_w]
            n = block.size
            # round-half-up of sum/n, kept in integer arithmetic
            out[r, c] = (2 * int(block.sum()) + n) // (2 * n)
    return out


def gradient_goodness(diff: int) -> int:
    """Map a signed height difference in [-255, 255] to goodness 1..5."""
    if diff < -255 or diff > 255:
        raise OutOfRange(f"height difference {diff} outside [-255, 255]")
    a = abs(int(diff))
    for goodness, edge in zip((5, 4, 3, 2, 1), _BAND_EDGES):
        if a <= edge:
            return goodness
    raise AssertionError("unreachable: bands cover [0, 255]")


def _goodness_of_abs_diff(absdiff: np.ndarray) -> np.ndarray:
    # digitize yields 0 for 0, 1 for 1-66, 2 for 67-129, 3 for 130-192, 4 above
    return 5 - np.digitize(absdiff, [1, 67, 130, 193])


def grid_gradient_goodness(heights: np.ndarray) -> np.ndarray:
    """Per-cell minimum gradient goodness over the 8 Moore neighbors.

    Boundary cells use only existing neighbors; an isolated cell scores 5.
    """
    h = np.asarray(heights, dtype=np.int64)
    rows, cols = h.shape
    out = np.full((rows, cols), 5, dtype=np.int64)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            r0, r1 = max(dr, 0), rows + min(dr, 0)
            c0, c1 = max(dc, 0), cols + min(dc, 0)
            if r0 >= r1 or c0 >= c1:
                continue
            diff = np.abs(h[r0:r1, c0:c1] - h[r0 - dr:r1 - dr, c0 - dc:c1 - dc])
            good = _goodness_of_abs_diff(diff)
            region = out[r0 - dr:r1 - dr, c0 - dc:c1 - dc]
            np.minimum(region, good, out=region)
    return out


def cell_gradient_goodness(heights: np.ndarray, index: tuple[int, int]) -> int:
    """Gradient goodness of one cell: min over its Moore neighbors."""
    h = np.asarray(heights, dtype=np.int64)
    r, c = index
    rows, cols = h.shape
    if not (0 <= r < rows and 0 <= c < cols):
        raise IndexOutOfBounds(f"cell ({r}, {c}) outside {rows}x{cols}")
    best = 5
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            nr, nc = r + dr, c + dc
            if 0 <= nr < rows and 0 <= nc < cols:
                best = min(best, gradient_goodness(int(h[nr, nc] - h[r, c])))
    return best


def soil_goodness(cat: SoilCategory,
                  table: Optional[Mapping[SoilCategory, int]] = None) -> int:
    table = DEFAULT_SOIL_GOODNESS if table is None else table
    return table[cat]


def load_soilmap(source: Union[str, bytes, TextIO],
                 mapping: Mapping[int, SoilCategory],
                 expected_shape: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Parse a CSV of integer cat values into a SoilCategory matrix."""
    if isinstance(source, bytes):
        source = source.decode()
    if isinstance(source, str):
        source = io.StringIO(source)
    rows = []
    width = None
    for record in csv.reader(source):
        if not record:
            continue
        try:
            cats = [int(v) for v in record]
        except ValueError as exc:
            raise UnknownCatValue(f"non-integer cat value in {record!r}") from exc
        if width is None:
            width = len(cats)
        elif len(cats) != width:
            raise DimensionMismatch("ragged soil CSV rows")
        row = []
        for v in cats:
            if v not in mapping:
                raise UnknownCatValue(f"cat value {v} not in mapping")
            row.append(mapping[v])
        rows.append(row)
    if not rows:
        raise EmptyImage("soil CSV has no rows")
    if expected_shape is not None and (len(rows), width) != tuple(expected_shape):
        raise DimensionMismatch(
            f"soil raster {len(rows)}x{width} vs expected {expected_shape}")
    soil = np.empty((len(rows), width), dtype=object)
    for r, row in enumerate(rows):
        soil[r, :] = row
    return soil


def parse_cat_mapping(obj: Mapping) -> dict[int, SoilCategory]:
    """Parse a {catValue: categoryName} JSON object."""
    out = {}
    for key, name in obj.items():
        try:
            cat = SoilCategory(name)
        except ValueError as exc:
            raise UnknownCatValue(f"unknown soil category {name!r}") from exc
        out[int(key)] = cat
    return out


def soil_goodness_matrix(soil: np.ndarray,
                         table: Optional[Mapping[SoilCategory, int]] = None) -> np.ndarray:
    table = DEFAULT_SOIL_GOODNESS if table is None else table
    out = np.zeros(soil.shape, dtype=np.int64)
    for r in range(soil.shape[0]):
        for c in range(soil.shape[1]):
            out[r, c] = table[soil[r, c]]
    return out


def build_terrain_grid(hm: HeightMap,
                       soil: np.ndarray,
                       *,
                       block_w: int = 4,
                       block_h: int = 2,
                       cell_size_m: float = 1.0,
                       soil_table: Optional[Mapping[SoilCategory, int]] = None) -> TerrainGrid:
    """Sub-sample the heightmap and combine with soil into a ranked grid."""
    heights = subsample(hm, block_w, block_h)
    if soil.shape != heights.shape:
        raise DimensionMismatch(
            f"soil raster {soil.shape} vs sub-sampled grid {heights.shape}")
    grad = grid_gradient_goodness(heights)
    soil_good = soil_goodness_matrix(soil, soil_table)
    rank = grad + soil_good
    return TerrainGrid(
        rows=heights.shape[0],
        cols=heights.shape[1],
        cell_size_m=cell_size_m,
        heights=heights,
        soil=soil,
        gradient_goodness=grad,
        soil_goodness=soil_good,
        rank=rank,
    )


def terrain_csv(grid: TerrainGrid) -> str:
    """Row-per-cell CSV: row,col,height,soil,gradGoodness,soilGoodness,rank."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["row", "col", "height", "soil", "gradGoodness",
                     "soilGoodness", "rank"])
    for r in range(grid.rows):
        for c in range(grid.cols):
            writer.writerow([r, c, int(grid.heights[r, c]), grid.soil[r, c].value,
                             int(grid.gradient_goodness[r, c]),
                             int(grid.soil_goodness[r, c]), int(grid.rank[r, c])])
    return out.getvalue()
