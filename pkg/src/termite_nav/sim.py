"""Deterministic 2D kinematic simulation of the full planning stack.

A differential-drive robot with a planar ray fan navigates a heightmap/soil
world containing axis-aligned crates. Crates known to the planner are
stamped into the terrain before the swarm runs; hidden crates only ever
appear through the range sensor. A penetrometer probe samples ground-truth
soil just ahead of the robot every tick.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import terrain as terrain_mod
from .corridor import CorridorState, build_dual_grids, build_swathe
from .errors import (
    GoalNotNavigable,
    NoFreeSector,
    NoPath,
    PointOutsideGrid,
    ScenarioError,
    StartNotNavigable,
)
from .global_planner import GlobalPath, plan_global
from .local_planner import (
    HistogramGrid,
    PenetrometerReading,
    RangeScan,
    SteeringCommand,
    VfhParams,
    apply_soil_reading,
    build_polar,
    select_direction,
    update_histogram,
    wrap_to_pi,
)
from .swarm import SwarmParams, run_swarm
from .terrain import SoilCategory, TerrainGrid, soil_goodness

#: No-tunneling bound: per-tick displacement must stay below this, m.
MAX_STEP_DISPLACEMENT = 0.05

EVENTS = ("none", "replan", "soilVeto", "waypoint", "goal", "collision", "stuck")


@dataclass
class RobotState:
    x: float
    y: float
    theta: float
    v: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class RobotParams:
    size: float = 0.5
    v_max: float = 0.5
    omega_max: float = 1.5
    k_theta: float = 2.0


@dataclass(frozen=True)
class SensorParams:
    fov: float = math.pi
    n_rays: int = 181
    max_range: float = 8.0


@dataclass(frozen=True)
class Crate:
    min_x: float
    min_y: float
    max_x: float
    max_y: float
    known_to_planner: bool = False

    def distance_to(self, x: float, y: float) -> float:
        dx = max(self.min_x - x, 0.0, x - self.max_x)
        dy = max(self.min_y - y, 0.0, y - self.max_y)
        return math.hypot(dx, dy)


@dataclass
class Scenario:
    heightmap_path: str
    soilmap_path: str
    cat_mapping: dict
    start: tuple[float, float]
    goal: tuple[float, float]
    goal_tolerance: float = 0.5
    start_theta: Optional[float] = None
    crates: list = field(default_factory=list)
    ground_truth_soil_path: Optional[str] = None
    sensor: SensorParams = field(default_factory=SensorParams)
    robot: RobotParams = field(default_factory=RobotParams)
    block_w: int = 4
    block_h: int = 2
    cell_size_m: float = 0.25
    half_width_cells: float = 8.0   # swathe half-width, in coarse cells
    swarm: SwarmParams = field(default_factory=SwarmParams)
    vfh: VfhParams = field(default_factory=VfhParams)
    lam: float = 0.1
    grade_goodness_min: int = 5
    dt: float = 0.1
    max_steps: int = 4000
    seed: int = 0
    probe_lead: Optional[float] = None   # penetrometer lead distance, m

    def validate(self) -> None:
        if tuple(self.start) == tuple(self.goal):
            raise ScenarioError("start and goal must differ")
        if self.sensor.n_rays < 2:
            raise ScenarioError("sensor needs at least 2 rays")
        if self.dt <= 0:
            raise ScenarioError("dt must be positive")
        if self.robot.v_max * self.dt > MAX_STEP_DISPLACEMENT + 1e-12:
            raise ScenarioError(
                f"v_max*dt = {self.robot.v_max * self.dt:.4f} exceeds the "
                f"no-tunneling bound {MAX_STEP_DISPLACEMENT}")


def _get(d: dict, key: str, default):
    return d[key] if key in d and d[key] is not None else default


def scenario_from_dict(doc: dict, base_dir: Optional[Path] = None) -> Scenario:
    """Build a Scenario from the JSON document structure."""
    try:
        base = Path(base_dir) if base_dir else Path(".")

        def path_of(p):
            if p is None:
                return None
            p = Path(p)
            return str(p if p.is_absolute() else base / p)

        sensor_d = doc.get("sensor", {})
        robot_d = doc.get("robot", {})
        terrain_d = doc.get("terrain", {})
        swarm_d = dict(doc.get("swarm", {}))
        vfh_d = dict(doc.get("vfh", {}))
        seed = int(doc.get("seed", 0))
        swarm_kwargs = {
            "n_agents": int(_get(swarm_d, "nAgents", 10)),
            "pellet_max": int(_get(swarm_d, "pelletMax", 8)),
            "rank_threshold": int(_get(swarm_d, "rankThreshold", 7)),
            "max_iterations": int(_get(swarm_d, "maxIterations", 5000)),
            "seed": int(_get(swarm_d, "seed", seed)),
        }
        vfh_kwargs = {
            "h_cell": float(_get(vfh_d, "hCell", 0.1)),
            "w_half": float(_get(vfh_d, "wHalf", 5.0)),
            "c_max": int(_get(vfh_d, "cMax", 15)),
            "n_sectors": int(_get(vfh_d, "nSectors", 72)),
            "s_min": int(_get(vfh_d, "sMin", 3)),
            "threshold": float(_get(vfh_d, "threshold", 3.0)),
            "v_max": float(_get(robot_d, "vMax", 0.5)),
            "v_min": float(_get(vfh_d, "vMin", 0.05)),
            "soil_block_threshold": int(_get(vfh_d, "soilBlockThreshold", 1)),
            "r_soil": vfh_d.get("rSoil"),
        }
        crates = [
            Crate(min_x=float(c["min"][0]), min_y=float(c["min"][1]),
                  max_x=float(c["max"][0]), max_y=float(c["max"][1]),
                  known_to_planner=bool(c.get("knownToPlanner", False)))
            for c in doc.get("crates", [])
        ]
        scenario = Scenario(
            heightmap_path=path_of(doc["heightmapPath"]),
            soilmap_path=path_of(doc["soilmapPath"]),
            cat_mapping=terrain_mod.parse_cat_mapping(doc["catMapping"]),
            start=(float(doc["start"][0]), float(doc["start"][1])),
            goal=(float(doc["goal"][0]), float(doc["goal"][1])),
            goal_tolerance=float(doc.get("goalTolerance", 0.5)),
            start_theta=(float(doc["startTheta"])
                         if doc.get("startTheta") is not None else None),
            crates=crates,
            ground_truth_soil_path=path_of(doc.get("groundTruthSoilPath")),
            sensor=SensorParams(
                fov=float(_get(sensor_d, "fov", math.pi)),
                n_rays=int(_get(sensor_d, "nRays", 181)),
                max_range=float(_get(sensor_d, "maxRange", 8.0)),
            ),
            robot=RobotParams(
                size=float(_get(robot_d, "size", 0.5)),
                v_max=float(_get(robot_d, "vMax", 0.5)),
                omega_max=float(_get(robot_d, "omegaMax", 1.5)),
                k_theta=float(_get(robot_d, "kTheta", 2.0)),
            ),
            block_w=int(_get(terrain_d, "blockW", 4)),
            block_h=int(_get(terrain_d, "blockH", 2)),
            cell_size_m=float(_get(terrain_d, "cellSizeMeters", 0.25)),
            half_width_cells=float(doc.get("corridor", {}).get("halfWidthCells", 8.0)),
            swarm=SwarmParams(**swarm_kwargs),
            vfh=VfhParams(**vfh_kwargs),
            lam=float(doc.get("planner", {}).get("lambda", 0.1)),
            grade_goodness_min=int(doc.get("gradeGoodnessMin", 5)),
            dt=float(doc.get("dt", 0.1)),
            max_steps=int(doc.get("maxSteps", 4000)),
            seed=seed,
            probe_lead=(float(doc["probeLead"])
                        if doc.get("probeLead") is not None else None),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc
    scenario.validate()
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed scenario JSON: {exc}") from exc
    return scenario_from_dict(doc, base_dir=path.parent)


@dataclass
class Outcome:
    reached: bool
    collided: bool
    steps: int
    path_length: float
    min_clearance: Optional[float]
    replans: int
    soil_violations: int
    grade_violations: int

    def to_json(self) -> str:
        doc = {
            "reached": self.reached,
            "collided": self.collided,
            "steps": self.steps,
            "pathLength": self.path_length,
            "minClearance": self.min_clearance,
            "replans": self.replans,
            "soilViolations": self.soil_violations,
            "gradeViolations": self.grade_violations,
        }
        return json.dumps(doc, sort_keys=True)


@dataclass(frozen=True)
class TraceRow:
    tick: int
    x: float
    y: float
    theta: float
    v: float
    omega: float
    event: str


class TraceLog:
    def __init__(self):
        self.rows: list[TraceRow] = []

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["tick", "x", "y", "theta", "v", "omega", "event"])
        for r in self.rows:
            writer.writerow([r.tick, repr(r.x), repr(r.y), repr(r.theta),
                             repr(r.v), repr(r.omega), r.event])
        return out.getvalue()


@dataclass
class RunResult:
    outcome: Outcome
    trace: TraceLog
    terrain: TerrainGrid
    corridor: CorridorState
    initial_path: GlobalPath
    final_path: GlobalPath


def raycast(pose, sensor: SensorParams, crates, bounds) -> RangeScan:
    """Distance along each ray to the nearest crate face or arena edge."""
    x, y, theta = pose
    width, height = bounds
    bearings = np.linspace(-sensor.fov / 2.0, sensor.fov / 2.0, sensor.n_rays)
    ang = theta + bearings
    dx = np.cos(ang)
    dy = np.sin(ang)
    t = np.full(sensor.n_rays, np.inf)
    # arena walls
    with np.errstate(divide="ignore"):
        for lim, pos, d in ((width, x, dx), (height, y, dy)):
            tw = np.where(d > 0, (lim - pos) / np.where(d == 0, 1, d),
                          np.where(d < 0, (0.0 - pos) / np.where(d == 0, 1, d), np.inf))
            t = np.minimum(t, np.where(tw >= 0, tw, np.inf))
    # crates, slab method
    for crate in crates:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_x = np.where(dx != 0, 1.0 / np.where(dx == 0, 1, dx), np.inf)
            inv_y = np.where(dy != 0, 1.0 / np.where(dy == 0, 1, dy), np.inf)
            tx1 = (crate.min_x - x) * inv_x
            tx2 = (crate.max_x - x) * inv_x
            ty1 = (crate.min_y - y) * inv_y
            ty2 = (crate.max_y - y) * inv_y
            # rays parallel to a slab: inside -> (-inf, inf), outside -> miss
            par_x = dx == 0
            tx_lo = np.where(par_x,
                             np.where((crate.min_x <= x) & (x <= crate.max_x), -np.inf, np.inf),
                             np.minimum(tx1, tx2))
            tx_hi = np.where(par_x,
                             np.where((crate.min_x <= x) & (x <= crate.max_x), np.inf, -np.inf),
                             np.maximum(tx1, tx2))
            par_y = dy == 0
            ty_lo = np.where(par_y,
                             np.where((crate.min_y <= y) & (y <= crate.max_y), -np.inf, np.inf),
                             np.minimum(ty1, ty2))
            ty_hi = np.where(par_y,
                             np.where((crate.min_y <= y) & (y <= crate.max_y), np.inf, -np.inf),
                             np.maximum(ty1, ty2))
        t_near = np.maximum(tx_lo, ty_lo)
        t_far = np.minimum(tx_hi, ty_hi)
        hit = (t_near <= t_far) & (t_far >= 0)
        t_hit = np.where(t_near >= 0, t_near, 0.0)
        t = np.where(hit, np.minimum(t, t_hit), t)
    ranges = np.minimum(t, sensor.max_range)
    return RangeScan(bearings=bearings, ranges=ranges, max_range=sensor.max_range)


def step_kinematics(state: RobotState, cmd: SteeringCommand, dt: float,
                    robot: RobotParams = RobotParams()) -> RobotState:
    """Unicycle integration with a proportional heading controller."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    err = wrap_to_pi(cmd.heading - state.theta)
    omega = max(-robot.omega_max, min(robot.omega_max, robot.k_theta * err))
    v = max(0.0, min(robot.v_max, cmd.speed))
    x = state.x + v * math.cos(state.theta) * dt
    y = state.y + v * math.sin(state.theta) * dt
    theta = wrap_to_pi(state.theta + omega * dt)
    return RobotState(x=x, y=y, theta=theta, v=v, omega=omega)


def penetrometer_sample(soil: np.ndarray, cell_size: float,
                        pos) -> PenetrometerReading:
    """Ground-truth soil category of the fine cell containing pos."""
    x, y = pos
    rows, cols = soil.shape
    if not (0.0 <= x < cols * cell_size and 0.0 <= y < rows * cell_size):
        raise PointOutsideGrid(f"probe position {pos} outside terrain")
    r = int(y // cell_size)
    c = int(x // cell_size)
    return PenetrometerReading(position=(x, y), category=soil[r, c])


def stamp_known_crates(grid: TerrainGrid, crates) -> None:
    """Mark fine cells covered by planner-known crates as rank-2 terrain."""
    s = grid.cell_size_m
    for crate in crates:
        if not crate.known_to_planner:
            continue
        r0 = max(0, int(math.floor(crate.min_y / s)))
        r1 = min(grid.rows, int(math.ceil(crate.max_y / s)))
        c0 = max(0, int(math.floor(crate.min_x / s)))
        c1 = min(grid.cols, int(math.ceil(crate.max_x / s)))
        grid.gradient_goodness[r0:r1, c0:c1] = 1
        grid.soil_goodness[r0:r1, c0:c1] = 1
        grid.rank[r0:r1, c0:c1] = 2


def build_world(scenario: Scenario) -> TerrainGrid:
    """Load terrain inputs and stamp planner-known crates."""
    with open(scenario.heightmap_path, "rb") as fh:
        hm = terrain_mod.load_heightmap(fh)
    heights_shape = (-(-hm.height // scenario.block_h),
                     -(-hm.width // scenario.block_w))
    with open(scenario.soilmap_path, "r", newline="") as fh:
        soil = terrain_mod.load_soilmap(fh, scenario.cat_mapping, heights_shape)
    grid = terrain_mod.build_terrain_grid(
        hm, soil, block_w=scenario.block_w, block_h=scenario.block_h,
        cell_size_m=scenario.cell_size_m)
    stamp_known_crates(grid, scenario.crates)
    return grid


def load_ground_truth_soil(scenario: Scenario, grid: TerrainGrid) -> np.ndarray:
    if scenario.ground_truth_soil_path is None:
        return grid.soil
    with open(scenario.ground_truth_soil_path, "r", newline="") as fh:
        return terrain_mod.load_soilmap(fh, scenario.cat_mapping,
                                        (grid.rows, grid.cols))


def plan_world(scenario: Scenario, grid: TerrainGrid):
    """Swathe, dual grids, swarm runs and the initial global plan."""
    cs = 4.0 * scenario.robot.size
    swathe = build_swathe(grid, scenario.start, scenario.goal,
                          scenario.half_width_cells * cs)
    dual = build_dual_grids(grid, swathe, scenario.robot.size)
    params_a = replace(scenario.swarm, seed=scenario.swarm.seed)
    params_b = replace(scenario.swarm, seed=scenario.swarm.seed + 0x5EED)
    nests = (run_swarm(dual.grid_a, params_a), run_swarm(dual.grid_b, params_b))
    corridor = CorridorState(dual=dual, nests=nests)
    path = plan_global(dual, nests, scenario.start, scenario.goal, scenario.lam)
    return corridor, path


def run_scenario(scenario: Scenario) -> RunResult:
    """Execute the closed-loop experiment; deterministic given the scenario."""
    scenario.validate()
    grid = build_world(scenario)
    corridor, path = plan_world(scenario, grid)
    initial_path = path
    dual = corridor.dual
    gt_soil = load_ground_truth_soil(scenario, grid)

    robot = scenario.robot
    vfh = scenario.vfh
    cs = dual.coarse_cell_size
    bounds = (grid.width_m, grid.height_m)
    probe_lead = scenario.probe_lead if scenario.probe_lead is not None else robot.size
    r_soil = vfh.r_soil if vfh.r_soil is not None else cs

    sx, sy = scenario.start
    gx, gy = scenario.goal
    theta0 = (scenario.start_theta if scenario.start_theta is not None
              else math.atan2(gy - sy, gx - sx))
    state = RobotState(x=sx, y=sy, theta=theta0)
    hist = HistogramGrid(vfh)
    trace = TraceLog()

    targets = list(path.waypoints) + [scenario.goal]
    wp_idx = 0
    reached = False
    collided = False
    path_length = 0.0
    min_clearance = math.inf
    replans = 0
    soil_viol = 0
    grade_viol = 0
    stuck_pending = False
    last_veto: Optional[tuple[float, float]] = None
    steps = 0
    margin = robot.size / 2.0
    eps = 1e-9

    for tick in range(1, scenario.max_steps + 1):
        steps = tick
        event = "none"
        pose = (state.x, state.y, state.theta)
        scan = raycast(pose, scenario.sensor, scenario.crates, bounds)
        update_histogram(hist, pose, scan)

        px = min(max(state.x + probe_lead * math.cos(state.theta), 0.0),
                 grid.width_m - eps)
        py = min(max(state.y + probe_lead * math.sin(state.theta), 0.0),
                 grid.height_m - eps)
        reading = penetrometer_sample(gt_soil, grid.cell_size_m, (px, py))
        if apply_soil_reading(reading, corridor, hist, vfh):
            event = "soilVeto"
            last_veto = (px, py)

        if corridor.replan_needed:
            try:
                path = plan_global(dual, corridor.nests, (state.x, state.y),
                                   scenario.goal, scenario.lam)
                targets = list(path.waypoints) + [scenario.goal]
                wp_idx = 0
                replans += 1
                event = "replan"
                corridor.replan_needed = False
            except (StartNotNavigable, GoalNotNavigable, NoPath):
                # retried next tick; the robot may first have to leave a
                # vetoed cell
                pass

        advanced = False
        while (wp_idx < len(targets) - 1
               and math.hypot(targets[wp_idx][0] - state.x,
                              targets[wp_idx][1] - state.y) <= cs):
            wp_idx += 1
            advanced = True
        if advanced and event == "none":
            event = "waypoint"
        tx, ty = targets[wp_idx]
        target_dir = math.atan2(ty - state.y, tx - state.x)

        polar = build_polar(hist, (state.x, state.y))
        try:
            cmd = select_direction(polar, target_dir, vfh.threshold, vfh)
            stuck_pending = False
        except NoFreeSector:
            if (last_veto is not None
                    and math.hypot(state.x - last_veto[0],
                                   state.y - last_veto[1]) <= r_soil + robot.size):
                # escape a soil veto painted around the robot: turn in place
                # away from the reading, then creep out
                away = math.atan2(state.y - last_veto[1], state.x - last_veto[0])
                if state.x == last_veto[0] and state.y == last_veto[1]:
                    away = wrap_to_pi(state.theta + math.pi)
                err = wrap_to_pi(away - state.theta)
                speed = 0.0 if abs(err) > math.pi / 2.0 else 0.5 * robot.v_max
                cmd = SteeringCommand(heading=away, speed=speed)
                stuck_pending = False
            elif not stuck_pending:
                stuck_pending = True
                corridor.replan_needed = True
                cmd = SteeringCommand(heading=state.theta, speed=0.0)
            else:
                trace.append(TraceRow(tick, state.x, state.y, state.theta,
                                      0.0, 0.0, "stuck"))
                break

        state = step_kinematics(state, cmd, scenario.dt, robot)
        state.x = min(max(state.x, margin), grid.width_m - margin)
        state.y = min(max(state.y, margin), grid.height_m - margin)
        path_length += abs(state.v) * scenario.dt

        if scenario.crates:
            clearance = min(c.distance_to(state.x, state.y)
                            for c in scenario.crates) - margin
            min_clearance = min(min_clearance, clearance)
            if clearance < 0.0:
                collided = True
                event = "collision"

        if not collided and math.hypot(state.x - gx, state.y - gy) <= scenario.goal_tolerance:
            reached = True
            event = "goal"

        cell = grid.cell_containing(state.x, state.y)
        if soil_goodness(gt_soil[cell]) == 1:
            soil_viol += 1
        if int(grid.gradient_goodness[cell]) < scenario.grade_goodness_min:
            grade_viol += 1

        trace.append(TraceRow(tick, state.x, state.y, state.theta,
                              state.v, state.omega, event))
        if collided or reached:
            break

    outcome = Outcome(
        reached=reached,
        collided=collided,
        steps=steps,
        path_length=path_length,
        min_clearance=None if min_clearance is math.inf else min_clearance,
        replans=replans,
        soil_violations=soil_viol,
        grade_violations=grade_viol,
    )
    return RunResult(outcome=outcome, trace=trace, terrain=grid,
                     corridor=corridor, initial_path=initial_path,
                     final_path=path)
