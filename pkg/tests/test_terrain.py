import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from termite_nav import terrain
from termite_nav.errors import (
    DimensionMismatch,
    IndexOutOfBounds,
    MalformedFormat,
    OutOfRange,
    OutOfRangeDepth,
    UnknownCatValue,
)
from termite_nav.terrain import (
    HeightMap,
    SoilCategory,
    build_terrain_grid,
    cell_gradient_goodness,
    gradient_goodness,
    load_heightmap,
    load_soilmap,
    soil_goodness,
    subsample,
)


def pgm(width, height, values, maxval=255):
    header = f"P5\n{width} {height}\n{maxval}\n".encode()
    return header + bytes(values)


class TestLoadHeightmap:
    def test_decodes_2x2(self):
        hm = load_heightmap(pgm(2, 2, [0, 255, 0, 255]))
        assert (hm.width, hm.height) == (2, 2)
        assert hm.values.flatten().tolist() == [0, 255, 0, 255]

    def test_rejects_16bit_depth(self):
        data = b"P5\n2 2\n65535\n" + bytes(8)
        with pytest.raises(OutOfRangeDepth):
            load_heightmap(data)

    def test_rejects_color_ppm(self):
        with pytest.raises(MalformedFormat):
            load_heightmap(b"P6\n1 1\n255\n" + bytes(3))

    def test_rejects_ascii_pgm(self):
        with pytest.raises(MalformedFormat):
            load_heightmap(b"P2\n1 1\n255\n0\n")

    def test_rejects_truncated_data(self):
        with pytest.raises(MalformedFormat):
            load_heightmap(pgm(4, 4, range(8)))

    def test_header_comments_are_skipped(self):
        data = b"P5\n# a comment\n2 1\n255\n" + bytes([7, 9])
        hm = load_heightmap(data)
        assert hm.values.flatten().tolist() == [7, 9]

    def test_512x512_matches_independent_decoder(self):
        rng = np.random.default_rng(42)
        img = rng.integers(0, 256, size=(512, 512), dtype=np.uint8)
        buf = io.BytesIO()
        Image.fromarray(img, mode="L").save(buf, format="PPM")
        hm = load_heightmap(buf.getvalue())
        assert hm.values.size == 262144
        assert hm.values.min() >= 0 and hm.values.max() <= 255
        ours = np.bincount(hm.values.flatten(), minlength=256)
        theirs = np.bincount(img.flatten(), minlength=256)
        assert (ours == theirs).all()


class TestSubsample:
    def test_constant_block_mean(self):
        hm = HeightMap(4, 2, np.full((2, 4), 100, dtype=np.uint8))
        assert subsample(hm).tolist() == [[100]]

    def test_half_rounds_up(self):
        # mean of {0,255}x4 is 127.5, rounds half-up to 128
        values = np.array([[0, 255, 0, 255], [0, 255, 0, 255]], dtype=np.uint8)
        assert subsample(HeightMap(4, 2, values)).tolist() == [[128]]

    def test_single_pixel_any_block(self):
        hm = HeightMap(1, 1, np.array([[42]], dtype=np.uint8))
        assert subsample(hm, 4, 2).tolist() == [[42]]

    def test_partial_edge_blocks_average_available_pixels(self):
        values = np.arange(6, dtype=np.uint8).reshape(2, 3)  # 3 wide, block 2
        out = subsample(HeightMap(3, 2, values), block_w=2, block_h=2)
        assert out.shape == (1, 2)
        assert out[0, 0] == round((0 + 1 + 3 + 4) / 4)
        assert out[0, 1] == round((2 + 5) / 2 + 0.000001)

    @given(st.integers(0, 255), st.integers(1, 12), st.integers(1, 12))
    @settings(max_examples=30, deadline=None)
    def test_constant_image_stays_constant(self, value, w, h):
        hm = HeightMap(w, h, np.full((h, w), value, dtype=np.uint8))
        assert (subsample(hm) == value).all()


class TestGradientGoodness:
    @pytest.mark.parametrize("diff,expected", [
        (0, 5), (1, 4), (66, 4), (67, 3), (129, 3), (130, 2), (192, 2),
        (193, 1), (200, 1), (255, 1), (-1, 4), (-66, 4), (-67, 3), (-100, 3),
        (-129, 3), (-130, 2), (-192, 2), (-193, 1), (-255, 1), (128, 3),
    ])
    def test_band_values(self, diff, expected):
        assert gradient_goodness(diff) == expected

    @pytest.mark.parametrize("diff", [-256, 256, 1000])
    def test_out_of_range(self, diff):
        with pytest.raises(OutOfRange):
            gradient_goodness(diff)

    def test_total_on_domain(self):
        for d in range(-255, 256):
            assert 1 <= gradient_goodness(d) <= 5

    @given(st.integers(-255, 255))
    @settings(max_examples=100, deadline=None)
    def test_sign_symmetric(self, d):
        assert gradient_goodness(d) == gradient_goodness(-d)


class TestCellGradientGoodness:
    def test_flat_center(self):
        assert cell_gradient_goodness(np.full((3, 3), 50), (1, 1)) == 5

    def test_steep_neighbor_dominates(self):
        h = np.zeros((3, 3), dtype=int)
        h[0, 0] = 255
        assert cell_gradient_goodness(h, (1, 1)) == 1

    def test_isolated_cell_is_flat(self):
        assert cell_gradient_goodness(np.array([[7]]), (0, 0)) == 5

    def test_out_of_bounds(self):
        with pytest.raises(IndexOutOfBounds):
            cell_gradient_goodness(np.zeros((2, 2)), (2, 0))

    def test_matches_vectorized_grid(self):
        rng = np.random.default_rng(7)
        h = rng.integers(0, 256, size=(9, 11))
        grid = terrain.grid_gradient_goodness(h)
        for r in range(9):
            for c in range(11):
                assert grid[r, c] == cell_gradient_goodness(h, (r, c))


class TestSoilGoodness:
    @pytest.mark.parametrize("cat,expected", [
        (SoilCategory.GRAVEL, 5), (SoilCategory.SAND, 4),
        (SoilCategory.CLAY, 3), (SoilCategory.SILT, 3), (SoilCategory.ROCK, 1),
    ])
    def test_table(self, cat, expected):
        assert soil_goodness(cat) == expected

    def test_override_table(self):
        table = dict(terrain.DEFAULT_SOIL_GOODNESS)
        table[SoilCategory.SILT] = 2
        assert soil_goodness(SoilCategory.SILT, table) == 2


class TestLoadSoilmap:
    def test_direct_mapping(self):
        mapping = {1: SoilCategory.GRAVEL, 2: SoilCategory.ROCK}
        out = load_soilmap("1,1\n2,2\n", mapping)
        assert out[0, 0] is SoilCategory.GRAVEL
        assert out[1, 1] is SoilCategory.ROCK

    def test_unknown_cat_value(self):
        with pytest.raises(UnknownCatValue):
            load_soilmap("1,3\n", {1: SoilCategory.GRAVEL})

    def test_dimension_mismatch(self):
        mapping = {1: SoilCategory.GRAVEL}
        with pytest.raises(DimensionMismatch):
            load_soilmap("1,1,1\n1,1,1\n1,1,1\n", mapping, expected_shape=(2, 2))

    def test_ragged_rows(self):
        with pytest.raises(DimensionMismatch):
            load_soilmap("1,1\n1\n", {1: SoilCategory.GRAVEL})


def uniform_soil(shape, cat):
    soil = np.empty(shape, dtype=object)
    soil[:, :] = cat
    return soil


class TestBuildTerrainGrid:
    def test_flat_gravel_is_rank_10(self):
        hm = HeightMap(8, 4, np.full((4, 8), 80, dtype=np.uint8))
        grid = build_terrain_grid(hm, uniform_soil((2, 2), SoilCategory.GRAVEL))
        assert (grid.rank == 10).all()

    def test_flat_rock_is_rank_6(self):
        hm = HeightMap(8, 4, np.full((4, 8), 80, dtype=np.uint8))
        grid = build_terrain_grid(hm, uniform_soil((2, 2), SoilCategory.ROCK))
        assert (grid.rank == 6).all()

    def test_random_instance_matches_bruteforce(self):
        rng = np.random.default_rng(3)
        pixels = rng.integers(0, 256, size=(32, 64), dtype=np.uint8)
        hm = HeightMap(64, 32, pixels)
        cats = list(SoilCategory)
        soil = np.empty((16, 16), dtype=object)
        for r in range(16):
            for c in range(16):
                soil[r, c] = cats[rng.integers(0, 5)]
        grid = build_terrain_grid(hm, soil)
        heights = subsample(hm)
        for r in range(16):
            for c in range(16):
                grad = cell_gradient_goodness(heights, (r, c))
                expected = grad + soil_goodness(soil[r, c])
                assert grid.rank[r, c] == expected
                assert 2 <= grid.rank[r, c] <= 10

    def test_rank_always_sum_of_goodness(self):
        rng = np.random.default_rng(11)
        pixels = rng.integers(0, 256, size=(16, 32), dtype=np.uint8)
        grid = build_terrain_grid(HeightMap(32, 16, pixels),
                                  uniform_soil((8, 8), SoilCategory.SAND))
        assert (grid.rank == grid.gradient_goodness + grid.soil_goodness).all()

    def test_soil_shape_mismatch(self):
        hm = HeightMap(8, 4, np.full((4, 8), 80, dtype=np.uint8))
        with pytest.raises(DimensionMismatch):
            build_terrain_grid(hm, uniform_soil((3, 3), SoilCategory.GRAVEL))

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        pixels = rng.integers(0, 256, size=(8, 16), dtype=np.uint8)
        soil = uniform_soil((4, 4), SoilCategory.CLAY)
        a = build_terrain_grid(HeightMap(16, 8, pixels), soil)
        b = build_terrain_grid(HeightMap(16, 8, pixels), soil)
        assert (a.rank == b.rank).all() and (a.heights == b.heights).all()

    def test_csv_export_roundtrip(self):
        hm = HeightMap(8, 4, np.full((4, 8), 80, dtype=np.uint8))
        grid = build_terrain_grid(hm, uniform_soil((2, 2), SoilCategory.GRAVEL))
        lines = terrain.terrain_csv(grid).strip().splitlines()
        assert lines[0] == "row,col,height,soil,gradGoodness,soilGoodness,rank"
        assert len(lines) == 1 + grid.rows * grid.cols
        assert lines[1] == "0,0,80,Gravel,5,5,10"
