import json
from pathlib import Path

import numpy as np
import pytest

from termite_nav import raster
from termite_nav.terrain import SoilCategory

CAT_MAPPING = {"1": "Gravel", "2": "Sand", "3": "Clay", "4": "Silt", "5": "Rock"}
CAT_OF = {SoilCategory.GRAVEL: 1, SoilCategory.SAND: 2, SoilCategory.CLAY: 3,
          SoilCategory.SILT: 4, SoilCategory.ROCK: 5}


def flat_heightmap_bytes(width: int, height: int, value: int = 100) -> bytes:
    return raster.pgm_bytes(np.full((height, width), value, dtype=np.uint8))


def soil_csv(cat_values: np.ndarray) -> str:
    return "\n".join(",".join(str(int(v)) for v in row) for row in cat_values) + "\n"


def write_world(tmp_path: Path, *, fine_rows=64, fine_cols=64, block_w=4,
                block_h=2, height_value=100, soil_cat=1,
                gt_soil: np.ndarray | None = None) -> dict:
    """Write flat heightmap + uniform soil files; returns scenario path fields."""
    hm_path = tmp_path / "height.pgm"
    hm_path.write_bytes(flat_heightmap_bytes(fine_cols * block_w,
                                             fine_rows * block_h, height_value))
    soil_path = tmp_path / "soil.csv"
    soil_path.write_text(soil_csv(np.full((fine_rows, fine_cols), soil_cat)))
    fields = {
        "heightmapPath": str(hm_path),
        "soilmapPath": str(soil_path),
        "catMapping": CAT_MAPPING,
    }
    if gt_soil is not None:
        gt_path = tmp_path / "gt_soil.csv"
        gt_path.write_text(soil_csv(gt_soil))
        fields["groundTruthSoilPath"] = str(gt_path)
    return fields


def base_scenario_doc(tmp_path: Path, **overrides) -> dict:
    """Flat 16x16 m gravel arena scenario (64x64 fine cells of 0.25 m)."""
    doc = {
        **write_world(tmp_path),
        "start": [2.0, 8.0],
        "goal": [14.0, 8.0],
        "goalTolerance": 0.5,
        "terrain": {"blockW": 4, "blockH": 2, "cellSizeMeters": 0.25},
        "robot": {"size": 0.5, "vMax": 0.5, "omegaMax": 1.5, "kTheta": 2.0},
        "sensor": {"fov": 3.141592653589793, "nRays": 181, "maxRange": 8.0},
        "swarm": {"nAgents": 10, "pelletMax": 8, "rankThreshold": 7,
                  "maxIterations": 3000},
        "dt": 0.1,
        "maxSteps": 4000,
        "seed": 0,
    }
    doc.update(overrides)
    return doc


def write_scenario(tmp_path: Path, doc: dict, name: str = "scenario.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=1))
    return path


@pytest.fixture
def flat_scenario_doc(tmp_path):
    return base_scenario_doc(tmp_path)
