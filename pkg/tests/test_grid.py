import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipdev.grid import (DyadicCube, GridSpec, SampledFunction, Tent,
                         cube_cell_slices, cubes_at_level, level_cube_count,
                         sample, tent_of)


class TestGridSpec:
    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError, match="dimension"):
            GridSpec(n=3, J=4)

    def test_rejects_bad_level(self):
        with pytest.raises(ValueError, match="finest level"):
            GridSpec(n=1, J=0)

    def test_rejects_bad_ext(self):
        with pytest.raises(ValueError, match="extension"):
            GridSpec(n=1, J=4, ext="mirror")

    def test_geometry(self):
        spec = GridSpec(n=2, J=3, K=1)
        assert spec.samples_per_axis == 16
        assert spec.spacing == 0.125
        assert spec.box_side == 2.0
        assert spec.shape == (16, 16)
        assert spec.cell_volume == 0.125**2

    def test_axis_centers(self):
        spec = GridSpec(n=1, J=2)
        assert np.allclose(spec.axis_centers(), [0.125, 0.375, 0.625, 0.875])

    def test_json_roundtrip(self):
        spec = GridSpec(n=2, J=5, K=1, ext="zero")
        assert GridSpec.from_json(spec.to_json()) == spec


class TestSampledFunction:
    def test_rejects_shape_mismatch(self):
        spec = GridSpec(n=1, J=3)
        with pytest.raises(ValueError, match="shape"):
            SampledFunction(spec, np.zeros(4))

    def test_rejects_nonfinite_with_coordinate(self):
        spec = GridSpec(n=1, J=2)
        v = np.zeros(4)
        v[2] = np.nan
        with pytest.raises(ValueError, match="0.625"):
            SampledFunction(spec, v)

    def test_scaled_and_norms(self):
        spec = GridSpec(n=1, J=2)
        f = SampledFunction(spec, np.array([1.0, -2.0, 0.5, 0.0]))
        assert f.sup_norm() == 2.0
        assert f.scaled(2.0).sup_norm() == 4.0
        assert f.l2_norm_sq() == pytest.approx((1 + 4 + 0.25) * 0.25)

    def test_sample_evaluates_at_cell_centers(self):
        spec = GridSpec(n=1, J=3)
        f = sample(lambda x: 2.0 * x, spec)
        assert np.allclose(f.values, 2.0 * spec.axis_centers())

    def test_sample_2d(self):
        spec = GridSpec(n=2, J=2)
        f = sample(lambda x, y: x + 10 * y, spec)
        c = spec.axis_centers()
        assert f.values[1, 3] == pytest.approx(c[1] + 10 * c[3])


class TestCubes:
    def test_counts(self):
        spec = GridSpec(n=2, J=4, K=1)
        for j in range(-1, 5):
            assert len(cubes_at_level(spec, j)) == level_cube_count(spec, j)
        assert level_cube_count(spec, 0) == 4

    def test_level_range_enforced(self):
        spec = GridSpec(n=1, J=3)
        with pytest.raises(ValueError, match="admissible"):
            cubes_at_level(spec, 4)
        with pytest.raises(ValueError, match="admissible"):
            cubes_at_level(spec, -1)

    def test_cell_slices_partition_grid(self):
        spec = GridSpec(n=2, J=3, K=0)
        for j in range(0, spec.J + 1):
            hit = np.zeros(spec.shape, dtype=int)
            for cube in cubes_at_level(spec, j):
                hit[cube_cell_slices(spec, cube)] += 1
            assert (hit == 1).all()

    def test_contains_point_matches_slices(self):
        spec = GridSpec(n=1, J=3)
        centers = spec.axis_centers()
        for cube in cubes_at_level(spec, 1):
            sl = cube_cell_slices(spec, cube)[0]
            inside = [cube.contains_point((x,)) for x in centers]
            expect = [sl.start <= i < sl.stop for i in range(len(centers))]
            assert inside == expect

    def test_tent_geometry(self):
        t = tent_of(DyadicCube(2, (1,)))
        assert isinstance(t, Tent)
        assert t.y_lo == 0.125
        assert t.y_hi == 0.25
        assert t.base.side == 0.25
        assert t.base.lower_corner() == (0.25,)

    @settings(max_examples=25, deadline=None)
    @given(j=st.integers(0, 4), k=st.integers(0, 1))
    def test_each_center_in_exactly_one_cube(self, j, k):
        spec = GridSpec(n=1, J=4, K=k)
        if j > spec.J:
            return
        x = float(spec.axis_centers()[7])
        owners = [c for c in cubes_at_level(spec, j) if c.contains_point((x,))]
        assert len(owners) == 1
