"""Termite-inspired nest discovery over a coarse grid.

Agents random-walk the swathe dropping permanent pellets on cells whose rank
meets the navigation threshold. A cell that accumulates enough pellets
becomes a focal cell; if its whole in-swathe Moore neighborhood also meets
the threshold, those cells become a nest. Touching nests merge into larger
contiguous navigable regions.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .corridor import CoarseGrid
from .errors import EmptySwathe

Cell = tuple[int, int]

_MIX = 0x9E3779B97F4A7C15


def _stream_rng(seed: int, stream: int) -> random.Random:
    # distinct deterministic stream per (seed, stream); stream 0 is reserved
    # for initial agent placement
    return random.Random(((seed & 0xFFFFFFFFFFFFFFFF) * _MIX + stream) & 0xFFFFFFFFFFFFFFFF)


class AgentMode(Enum):
    DROPPING = "DROPPING"
    BUILDING = "BUILDING"


@dataclass
class SwarmParams:
    n_agents: int = 10
    pellet_max: int = 8
    rank_threshold: int = 7
    max_iterations: int = 5000
    seed: int = 0
    forage_radius: int = 2   # Chebyshev radius around the focal cell
    stall_budget: int = 16

    def __post_init__(self):
        if self.n_agents < 1 or self.pellet_max < 1 or self.max_iterations < 1:
            raise ValueError("n_agents, pellet_max, max_iterations must be >= 1")
        if not 2 <= self.rank_threshold <= 10:
            raise ValueError("rank_threshold must be in [2, 10]")


@dataclass
class Agent:
    agent_id: int
    position: Cell
    mode: AgentMode = AgentMode.DROPPING
    focal: Optional[Cell] = None
    stall: int = 0
    rng: random.Random = field(default_factory=random.Random, repr=False)


class NestMap:
    """Assignment of coarse cells to nests; a cell is in at most one nest."""

    def __init__(self):
        self.cell_to_nest: dict[Cell, int] = {}
        self.nests: dict[int, set[Cell]] = {}
        self._next_id = 0

    def contains(self, cell: Cell) -> bool:
        return cell in self.cell_to_nest

    def add_nest(self, cells) -> Optional[int]:
        new = [c for c in cells if c not in self.cell_to_nest]
        if not new:
            return None
        nest_id = self._next_id
        self._next_id += 1
        self.nests[nest_id] = set(new)
        for c in new:
            self.cell_to_nest[c] = nest_id
        return nest_id

    def remove_cell(self, cell: Cell) -> bool:
        nest_id = self.cell_to_nest.pop(cell, None)
        if nest_id is None:
            return False
        members = self.nests[nest_id]
        members.discard(cell)
        if not members:
            del self.nests[nest_id]
        return True

    def all_cells(self) -> set[Cell]:
        return set(self.cell_to_nest)

    def to_json(self, threshold: int) -> str:
        doc = {
            "threshold": threshold,
            "nests": [
                {"id": nid, "cells": sorted(list(c) for c in cells)}
                for nid, cells in sorted(self.nests.items())
            ],
        }
        return json.dumps(doc, sort_keys=True)


def moore_neighbors(cell: Cell) -> list[Cell]:
    i, j = cell
    return [(i + di, j + dj)
            for di in (-1, 0, 1) for dj in (-1, 0, 1)
            if not (di == 0 and dj == 0)]


def _swathe_set(grid: CoarseGrid) -> set[Cell]:
    return set(grid.iter_swathe_cells())


def try_build_nest(focal: Cell, grid: CoarseGrid, nests: NestMap,
                   params: SwarmParams,
                   swathe: Optional[set[Cell]] = None) -> Optional[set[Cell]]:
    """Create a nest of focal + its in-swathe Moore neighbors, if they all
    meet the rank threshold. Returns the nest cells or None."""
    if swathe is None:
        swathe = _swathe_set(grid)
    vicinity = [c for c in moore_neighbors(focal) if c in swathe]
    if any(grid.rank_at(*c) < params.rank_threshold for c in vicinity):
        return None
    cells = {focal, *vicinity}
    if nests.add_nest(sorted(cells)) is None:
        return None
    return cells


def step_agent(agent: Agent, grid: CoarseGrid, pellets: dict,
               nests: NestMap, params: SwarmParams,
               swathe: Optional[set[Cell]] = None,
               neighbors: Optional[dict] = None) -> None:
    """Advance one agent by one tick, mutating pellets/nests in place."""
    if swathe is None:
        swathe = _swathe_set(grid)
    if neighbors is None:
        neighbors = {c: sorted(n for n in moore_neighbors(c) if n in swathe)
                     for c in swathe}

    pos = agent.position
    if agent.mode is AgentMode.DROPPING:
        if grid.rank_at(*pos) >= params.rank_threshold:
            count = pellets.get(pos, 0) + 1
            pellets[pos] = count
            if count >= params.pellet_max and not nests.contains(pos):
                agent.focal = pos
                agent.mode = AgentMode.BUILDING
                agent.stall = 0
                return
        options = neighbors[pos]
        if options:
            agent.position = options[agent.rng.randrange(len(options))]
        return

    # BUILDING: try to found a nest at the focal cell, then forage nearby
    focal = agent.focal
    if focal is None or nests.contains(focal):
        agent.mode = AgentMode.DROPPING
        agent.focal = None
        return
    if try_build_nest(focal, grid, nests, params, swathe) is not None:
        agent.mode = AgentMode.DROPPING
        agent.focal = None
        return
    agent.stall += 1
    if agent.stall > params.stall_budget:
        agent.mode = AgentMode.DROPPING
        agent.focal = None
        return
    fr = params.forage_radius
    fi, fj = focal
    options = [n for n in neighbors[pos]
               if abs(n[0] - fi) <= fr and abs(n[1] - fj) <= fr]
    if options:
        agent.position = options[agent.rng.randrange(len(options))]
    pos = agent.position
    if pos != focal and grid.rank_at(*pos) >= params.rank_threshold:
        count = pellets.get(pos, 0) + 1
        pellets[pos] = count
        if count >= params.pellet_max and not nests.contains(pos):
            agent.focal = pos
            agent.stall = 0


def merge_nests(nests: NestMap) -> NestMap:
    """Union 4-adjacent nests to fixpoint: connected components of the union
    of nest cells, each keeping the smallest original nest id."""
    cells = nests.all_cells()
    merged = NestMap()
    seen: set[Cell] = set()
    components = []
    for cell in sorted(cells):
        if cell in seen:
            continue
        comp = set()
        stack = [cell]
        seen.add(cell)
        while stack:
            i, j = stack.pop()
            comp.add((i, j))
            for n in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                if n in cells and n not in seen:
                    seen.add(n)
                    stack.append(n)
        components.append(comp)
    for comp in components:
        nest_id = min(nests.cell_to_nest[c] for c in comp)
        merged.nests[nest_id] = comp
        for c in comp:
            merged.cell_to_nest[c] = nest_id
    merged._next_id = nests._next_id
    return merged


def run_swarm(grid: CoarseGrid, params: SwarmParams) -> NestMap:
    """Run the swarm for max_iterations global ticks and merge the nests.

    Deterministic for a fixed seed: agents step sequentially in id order and
    each draws from its own (seed, id)-derived stream.
    """
    swathe_cells = sorted(grid.iter_swathe_cells())
    if not swathe_cells:
        raise EmptySwathe("coarse grid covers no swathe cells")
    swathe = set(swathe_cells)
    neighbors = {c: sorted(n for n in moore_neighbors(c) if n in swathe)
                 for c in swathe_cells}

    init_rng = _stream_rng(params.seed, 0)
    agents = [
        Agent(agent_id=a,
              position=swathe_cells[init_rng.randrange(len(swathe_cells))],
              rng=_stream_rng(params.seed, a + 1))
        for a in range(params.n_agents)
    ]
    pellets: dict[Cell, int] = {}
    nests = NestMap()
    for _ in range(params.max_iterations):
        for agent in agents:
            step_agent(agent, grid, pellets, nests, params, swathe, neighbors)
    return merge_nests(nests)


def pellet_csv(pellets: dict, grid: CoarseGrid) -> str:
    """Pellet counts as a CSV matrix over the coarse grid extent."""
    lines = []
    for i in range(grid.i_min, grid.i_min + grid.n_rows):
        row = [str(pellets.get((i, j), 0))
               for j in range(grid.j_min, grid.j_min + grid.n_cols)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
