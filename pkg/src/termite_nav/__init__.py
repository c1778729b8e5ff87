"""Two-level path planning: swarm-discovered navigable regions over ranked
terrain, plus vector-field-histogram local obstacle and soil avoidance."""

from . import errors
from .corridor import (
    CoarseGrid,
    CorridorState,
    DualGrid,
    Swathe,
    build_dual_grids,
    build_swathe,
    navigable_at,
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
)
from .sim import (
    Crate,
    Outcome,
    RobotParams,
    RobotState,
    Scenario,
    SensorParams,
    load_scenario,
    penetrometer_sample,
    raycast,
    run_scenario,
    step_kinematics,
)
from .swarm import NestMap, SwarmParams, merge_nests, run_swarm
from .terrain import (
    HeightMap,
    SoilCategory,
    TerrainGrid,
    build_terrain_grid,
    cell_gradient_goodness,
    gradient_goodness,
    load_heightmap,
    load_soilmap,
    soil_goodness,
    subsample,
)

__version__ = "0.1.0"
