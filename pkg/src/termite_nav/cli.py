"""Command-line entry point: termite-nav rank|swarm|plan|simulate|render.

Exit codes: 0 success, 1 domain failure (no path, goal not reached),
2 usage or format error. All commands are deterministic given their inputs
and --seed; reruns produce byte-identical files.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import raster, render, sim
from . import terrain as terrain_mod
from .corridor import build_dual_grids, build_swathe
from .errors import (
    GoalNotNavigable,
    NoPath,
    StartNotNavigable,
    TermiteNavError,
)
from .global_planner import path_csv, path_json, plan_global
from .swarm import SwarmParams, run_swarm

USAGE_ERROR = 2
DOMAIN_ERROR = 1

DOMAIN_ERRORS = (StartNotNavigable, GoalNotNavigable, NoPath)

DEFAULT_CONFIG = {
    "terrain": {"blockW": 4, "blockH": 2, "cellSizeMeters": 1.0},
    "corridor": {"halfWidthCells": 8.0},
    "robot": {"size": 0.5},
    "swarm": {"nAgents": 10, "pelletMax": 8, "rankThreshold": 7,
              "maxIterations": 5000},
    "planner": {"lambda": 0.1},
}


class UsageError(Exception):
    pass


def parse_overrides(pairs, config):
    """Apply --set dotted.key=value pairs onto a nested config dict."""
    config = copy.deepcopy(config)
    for pair in pairs or ():
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        parts = key.split(".")
        node = config
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise UsageError(f"unknown parameter {key!r}")
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise UsageError(f"unknown parameter {key!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node[parts[-1]] = value
    return config


def _parse_point(text):
    try:
        x, y = text.split(",")
        return (float(x), float(y))
    except ValueError as exc:
        raise UsageError(f"expected x,y point, got {text!r}") from exc


def _load_terrain(args, config):
    t = config["terrain"]
    try:
        with open(args.heightmap, "rb") as fh:
            hm = terrain_mod.load_heightmap(fh)
        mapping = terrain_mod.parse_cat_mapping(
            json.loads(Path(args.catmap).read_text()))
        shape = (-(-hm.height // int(t["blockH"])), -(-hm.width // int(t["blockW"])))
        with open(args.soilmap, "r", newline="") as fh:
            soil = terrain_mod.load_soilmap(fh, mapping, shape)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed catmap JSON: {exc}") from exc
    return terrain_mod.build_terrain_grid(
        hm, soil, block_w=int(t["blockW"]), block_h=int(t["blockH"]),
        cell_size_m=float(t["cellSizeMeters"]))


def _swarm_pipeline(args, config, grid):
    robot_size = float(config["robot"]["size"])
    cs = 4.0 * robot_size
    start = _parse_point(args.start)
    goal = _parse_point(args.goal)
    swathe = build_swathe(grid, start, goal,
                          float(config["corridor"]["halfWidthCells"]) * cs)
    dual = build_dual_grids(grid, swathe, robot_size)
    s = config["swarm"]
    params_a = SwarmParams(n_agents=int(s["nAgents"]), pellet_max=int(s["pelletMax"]),
                           rank_threshold=int(s["rankThreshold"]),
                           max_iterations=int(s["maxIterations"]), seed=args.seed)
    params_b = SwarmParams(n_agents=int(s["nAgents"]), pellet_max=int(s["pelletMax"]),
                           rank_threshold=int(s["rankThreshold"]),
                           max_iterations=int(s["maxIterations"]),
                           seed=args.seed + 0x5EED)
    nests = (run_swarm(dual.grid_a, params_a), run_swarm(dual.grid_b, params_b))
    return start, goal, dual, nests, int(s["rankThreshold"])


def cmd_rank(args) -> int:
    config = parse_overrides(args.set, DEFAULT_CONFIG)
    grid = _load_terrain(args, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "terrain.csv").write_text(terrain_mod.terrain_csv(grid))
    raster.write_pgm(out / "rank.pgm", render.rank_image(grid))
    return 0


def cmd_swarm(args) -> int:
    config = parse_overrides(args.set, DEFAULT_CONFIG)
    grid = _load_terrain(args, config)
    _, _, dual, nests, threshold = _swarm_pipeline(args, config, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "nests_a.json").write_text(nests[0].to_json(threshold))
    (out / "nests_b.json").write_text(nests[1].to_json(threshold))
    raster.write_ppm(out / "overlay.ppm", render.nest_overlay(grid, dual, nests))
    return 0


def cmd_plan(args) -> int:
    config = parse_overrides(args.set, DEFAULT_CONFIG)
    grid = _load_terrain(args, config)
    start, goal, dual, nests, _ = _swarm_pipeline(args, config, grid)
    path = plan_global(dual, nests, start, goal,
                       float(config["planner"]["lambda"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "path.csv").write_text(path_csv(path))
    (out / "path.json").write_text(path_json(path))
    return 0


SCENARIO_KEYS = {
    "heightmapPath", "soilmapPath", "catMapping", "groundTruthSoilPath",
    "start", "goal", "startTheta", "goalTolerance", "crates", "sensor",
    "robot", "terrain", "corridor", "swarm", "vfh", "planner",
    "gradeGoodnessMin", "dt", "maxSteps", "seed", "probeLead",
}


def _apply_scenario_overrides(doc: dict, pairs) -> dict:
    doc = copy.deepcopy(doc)
    for pair in pairs or ():
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        parts = key.split(".")
        if parts[0] not in SCENARIO_KEYS:
            raise UsageError(f"unknown scenario parameter {key!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"cannot override through scalar at {part!r}")
        node[parts[-1]] = value
    return doc


def _simulate_one(scenario_path: Path, out: Path, args) -> int:
    try:
        doc = json.loads(scenario_path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed scenario JSON: {exc}") from exc
    doc = _apply_scenario_overrides(doc, args.set)
    scenario = sim.scenario_from_dict(doc, base_dir=scenario_path.parent)
    if args.seed is not None:
        scenario.seed = args.seed
        scenario.swarm.seed = args.seed
    result = sim.run_scenario(scenario)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(result.trace.to_csv())
    (out / "outcome.json").write_text(result.outcome.to_json())
    (out / "path.csv").write_text(path_csv(result.initial_path))
    img = render.trajectory_image(
        result.terrain, result.initial_path.waypoints,
        [(r.x, r.y) for r in result.trace.rows], scenario.crates,
        start=scenario.start, goal=scenario.goal)
    raster.write_ppm(out / "trajectory.ppm", img)
    return 0 if result.outcome.reached else DOMAIN_ERROR


def cmd_simulate(args) -> int:
    scenario_path = Path(args.scenario)
    out = Path(args.out)
    if scenario_path.is_dir():
        scenarios = sorted(scenario_path.glob("*.json"))
        if not scenarios:
            raise UsageError(f"no scenario files in {scenario_path}")
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            codes = list(pool.map(
                lambda p: _simulate_one(p, out / p.stem, args), scenarios))
        return max(codes)
    return _simulate_one(scenario_path, out, args)


def cmd_render(args) -> int:
    scenario = sim.load_scenario(args.scenario)
    grid = sim.build_world(scenario)
    trace_points = []
    try:
        import csv as csv_mod
        with open(args.trace, newline="") as fh:
            for row in csv_mod.DictReader(fh):
                trace_points.append((float(row["x"]), float(row["y"])))
    except (FileNotFoundError, KeyError, ValueError) as exc:
        raise UsageError(f"bad trace file: {exc}") from exc
    waypoints = []
    if args.path:
        try:
            import csv as csv_mod
            with open(args.path, newline="") as fh:
                for row in csv_mod.DictReader(fh):
                    waypoints.append((float(row["x_m"]), float(row["y_m"])))
        except (FileNotFoundError, KeyError, ValueError) as exc:
            raise UsageError(f"bad path file: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    img = render.trajectory_image(grid, waypoints, trace_points,
                                  scenario.crates, start=scenario.start,
                                  goal=scenario.goal)
    raster.write_ppm(out / "trajectory.ppm", img)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="termite-nav",
        description="Terrain ranking, swarm nest discovery, global planning "
                    "and VFH-driven simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, terrain_inputs=False, endpoints=False):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a parameter by dotted key")
        if terrain_inputs:
            p.add_argument("--heightmap", required=True)
            p.add_argument("--soilmap", required=True)
            p.add_argument("--catmap", required=True,
                           help="JSON {catValue: categoryName}")
        if endpoints:
            p.add_argument("--start", required=True, metavar="X,Y")
            p.add_argument("--goal", required=True, metavar="X,Y")

    p_rank = sub.add_parser("rank", help="rank map CSV + PGM")
    common(p_rank, terrain_inputs=True)
    p_rank.set_defaults(func=cmd_rank)

    p_swarm = sub.add_parser("swarm", help="nest maps + overlay image")
    common(p_swarm, terrain_inputs=True, endpoints=True)
    p_swarm.set_defaults(func=cmd_swarm)

    p_plan = sub.add_parser("plan", help="global waypoint path")
    common(p_plan, terrain_inputs=True, endpoints=True)
    p_plan.set_defaults(func=cmd_plan)

    p_simulate = sub.add_parser("simulate", help="run a scenario file")
    p_simulate.add_argument("--scenario", required=True,
                            help="scenario JSON file or directory of them")
    p_simulate.add_argument("--out", required=True)
    p_simulate.add_argument("--seed", type=int, default=None)
    p_simulate.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_simulate.add_argument("--jobs", type=int, default=1)
    p_simulate.set_defaults(func=cmd_simulate)

    p_render = sub.add_parser("render", help="trajectory image from a trace")
    p_render.add_argument("--scenario", required=True)
    p_render.add_argument("--trace", required=True)
    p_render.add_argument("--path", default=None)
    p_render.add_argument("--out", required=True)
    p_render.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"termite-nav: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except DOMAIN_ERRORS as exc:
        print(f"termite-nav: {exc}", file=sys.stderr)
        return DOMAIN_ERROR
    except FileNotFoundError as exc:
        print(f"termite-nav: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except TermiteNavError as exc:
        print(f"termite-nav: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
