"""Global waypoint path through nest cells of the dual grid.

Nodes are nest cells of both coarse grids; edges are 4-adjacency within a
grid plus links between spatially overlapping cells of different grids.
Every edge costs center distance scaled by a rank penalty, so cost >=
distance and A* with a Euclidean heuristic is admissible and consistent.
(Making overlap links literally free would let chained A-B-A hops teleport
across the map at zero cost, producing meaningless paths.)
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import dataclass

from .corridor import CoarseGrid, DualGrid
from .errors import GoalNotNavigable, NoPath, StartNotNavigable

Node = tuple[int, int, int]   # (grid index, i, j)
Point = tuple[float, float]


@dataclass(frozen=True)
class GlobalPath:
    waypoints: list
    nodes: list
    cost: float
    total_length: float


def edge_cost(p: Point, q: Point, rank_p: int, rank_q: int, lam: float) -> float:
    dist = math.hypot(q[0] - p[0], q[1] - p[1])
    return dist * (1.0 + lam * (10.0 - (rank_p + rank_q) / 2.0))


def _spans_overlap(a0: float, a1: float, b0: float, b1: float) -> bool:
    return a0 < b1 and b0 < a1


def overlapping_cells(src: CoarseGrid, dst: CoarseGrid, i: int, j: int):
    """Cells of dst whose area intersects cell (i, j) of src."""
    x0, y0, x1, y1 = src.cell_span(i, j)
    cs = dst.cell_size
    off = dst.offset
    i_lo = int(math.floor((y0 - off) / cs))
    i_hi = int(math.ceil((y1 - off) / cs)) - 1
    j_lo = int(math.floor((x0 - off) / cs))
    j_hi = int(math.ceil((x1 - off) / cs)) - 1
    out = []
    for di in range(i_lo, i_hi + 1):
        for dj in range(j_lo, j_hi + 1):
            bx0, by0, bx1, by1 = dst.cell_span(di, dj)
            if _spans_overlap(x0, x1, bx0, bx1) and _spans_overlap(y0, y1, by0, by1):
                out.append((di, dj))
    return out


def node_neighbors(dual: DualGrid, nests, node: Node, lam: float):
    """Yield (neighbor node, edge cost) over the navigability graph."""
    g, i, j = node
    grid = dual.grids[g]
    nest = nests[g]
    center = grid.center(i, j)
    rank = grid.rank_at(i, j)
    for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
        if nest.contains((ni, nj)):
            yield ((g, ni, nj),
                   edge_cost(center, grid.center(ni, nj), rank,
                             grid.rank_at(ni, nj), lam))
    other = 1 - g
    other_grid = dual.grids[other]
    other_nest = nests[other]
    for (oi, oj) in overlapping_cells(grid, other_grid, i, j):
        if other_nest.contains((oi, oj)):
            yield ((other, oi, oj),
                   edge_cost(center, other_grid.center(oi, oj), rank,
                             other_grid.rank_at(oi, oj), lam))


def snap_to_node(dual: DualGrid, nests, p: Point) -> Node | None:
    """Containing nest cell, gridA winning when both grids qualify."""
    for g, (grid, nest) in enumerate(zip(dual.grids, nests)):
        cell = grid.cell_containing(*p)
        if nest.contains(cell):
            return (g, cell[0], cell[1])
    return None


def plan_global(dual: DualGrid, nests, start: Point, goal: Point,
                lam: float = 0.1) -> GlobalPath:
    """Minimum-cost waypoint path from start to goal through nest cells."""
    start_node = snap_to_node(dual, nests, start)
    if start_node is None:
        raise StartNotNavigable(f"start {start} not inside any nest")
    goal_node = snap_to_node(dual, nests, goal)
    if goal_node is None:
        raise GoalNotNavigable(f"goal {goal} not inside any nest")

    goal_center = dual.grids[goal_node[0]].center(goal_node[1], goal_node[2])

    def heuristic(node: Node) -> float:
        cx, cy = dual.grids[node[0]].center(node[1], node[2])
        return math.hypot(goal_center[0] - cx, goal_center[1] - cy)

    dist: dict[Node, float] = {start_node: 0.0}
    parent: dict[Node, Node] = {}
    # heap entries ordered by (f, gridIndex, i, j) for deterministic ties
    heap: list[tuple[float, int, int, int]] = [(heuristic(start_node), *start_node)]
    done: set[Node] = set()
    while heap:
        _, g, i, j = heapq.heappop(heap)
        node = (g, i, j)
        if node in done:
            continue
        done.add(node)
        if node == goal_node:
            break
        d = dist[node]
        for nbr, w in node_neighbors(dual, nests, node, lam):
            nd = d + w
            if nbr not in dist or nd < dist[nbr]:
                dist[nbr] = nd
                parent[nbr] = node
                heapq.heappush(heap, (nd + heuristic(nbr), *nbr))
    if goal_node not in done:
        raise NoPath(f"no route from {start_node} to {goal_node}")

    nodes = [goal_node]
    while nodes[-1] != start_node:
        nodes.append(parent[nodes[-1]])
    nodes.reverse()
    waypoints = [dual.grids[g].center(i, j) for (g, i, j) in nodes]
    length = sum(math.hypot(b[0] - a[0], b[1] - a[1])
                 for a, b in zip(waypoints, waypoints[1:]))
    return GlobalPath(waypoints=waypoints, nodes=nodes,
                      cost=dist[goal_node], total_length=length)


def path_csv(path: GlobalPath) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["x_m", "y_m"])
    for x, y in path.waypoints:
        writer.writerow([repr(float(x)), repr(float(y))])
    return out.getvalue()


def path_json(path: GlobalPath) -> str:
    return json.dumps({
        "cost": path.cost,
        "length": path.total_length,
        "waypoints": [[x, y] for x, y in path.waypoints],
    }, sort_keys=True)
