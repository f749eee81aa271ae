import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipdev.grid import GridSpec, SampledFunction, sample
from lipdev.difference import (DiffConfig, RegionMask, bad_set, diff_field,
                               diff_modulus, lip_norm, ratio_fields, sym_diff,
                               whitney_gap)


class TestDiffConfig:
    def test_rejects_s_at_or_above_r(self):
        with pytest.raises(ValueError, match="0 < s < r"):
            DiffConfig(r=1, s=1.0)
        with pytest.raises(ValueError, match="0 < s < r"):
            DiffConfig(r=2, s=2.5)

    def test_rejects_bad_mode(self):
        with pytest.raises(ValueError):
            DiffConfig(r=1, s=0.5, h_mode="avg")


class TestSymDiff:
    def test_first_difference_of_linear(self):
        spec = GridSpec(n=1, J=5, ext="zero")
        f = sample(lambda x: 3.0 * x, spec)
        x = (float(spec.axis_centers()[16]),)
        h = (2 * spec.spacing,)
        assert sym_diff(f, x, h, 1) == pytest.approx(3.0 * h[0], abs=1e-14)

    def test_second_difference_of_square(self):
        spec = GridSpec(n=1, J=5, ext="zero")
        f = sample(lambda x: x**2, spec)
        x = (float(spec.axis_centers()[16]),)
        h = (2 * spec.spacing,)
        assert sym_diff(f, x, h, 2) == pytest.approx(2 * h[0] ** 2, abs=1e-14)

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_annihilates_lower_degree_polynomials(self, r):
        spec = GridSpec(n=1, J=6, ext="zero")
        f = sample(lambda x: sum(x**d for d in range(r)), spec)
        x = (float(spec.axis_centers()[32]),)
        h = (2 * spec.spacing,)
        assert abs(sym_diff(f, x, h, r)) <= 1e-12

    def test_rejects_off_grid_arguments(self):
        spec = GridSpec(n=1, J=4)
        f = sample(lambda x: x, spec)
        with pytest.raises(ValueError, match="cell center"):
            sym_diff(f, (0.3,), (2 * spec.spacing,), 1)
        with pytest.raises(ValueError, match="grid-representable"):
            sym_diff(f, (float(spec.axis_centers()[4]),), (0.01,), 1)


class TestFieldsAndModulus:
    def test_band_heights_increase_within_level(self):
        spec = GridSpec(n=1, J=6)
        f = sample(lambda x: np.sin(2 * np.pi * x), spec)
        cfg = DiffConfig(r=1, s=0.5)
        for j in range(1, spec.J):
            fld, ys = diff_field(f, cfg, j)
            assert fld.shape == (cfg.M,) + spec.shape
            assert np.all(np.diff(ys) >= 0)
            assert np.all(ys > 0) and np.all(ys <= 2.0 ** (-j) * spec.box_side)

    def test_sup_mode_dominates_exact_mode(self):
        spec = GridSpec(n=1, J=6)
        f = sample(lambda x: np.sin(2 * np.pi * x) + 0.3 * np.sin(16 * np.pi * x),
                   spec)
        exact = diff_field(f, DiffConfig(r=1, s=0.5, h_mode="exact"), 2)[0]
        sup = diff_field(f, DiffConfig(r=1, s=0.5, h_mode="sup"), 2)[0]
        assert np.all(sup >= exact - 1e-15)

    def test_modulus_matches_field(self):
        spec = GridSpec(n=1, J=5)
        f = sample(lambda x: np.cos(2 * np.pi * x), spec)
        cfg = DiffConfig(r=1, s=0.5)
        fld, ys = diff_field(f, cfg, 1)
        i = 7
        x = (float(spec.axis_centers()[i]),)
        assert diff_modulus(f, x, float(ys[-1]), cfg) == pytest.approx(
            float(fld[-1, i]), abs=1e-14)

    def test_lip_norm_of_constant(self):
        spec = GridSpec(n=1, J=5)
        f = SampledFunction(spec, np.full(spec.shape, 3.0))
        sup, semi = lip_norm(f, DiffConfig(r=1, s=0.5))
        assert sup == 3.0 and semi == 0.0

    def test_lip_norm_scales_linearly(self):
        spec = GridSpec(n=1, J=6)
        f = sample(lambda x: np.sin(2 * np.pi * x), spec)
        cfg = DiffConfig(r=1, s=0.5)
        sup1, semi1 = lip_norm(f, cfg)
        sup2, semi2 = lip_norm(f.scaled(2.0), cfg)
        assert sup2 == 2 * sup1 and semi2 == 2 * semi1


class TestBadSet:
    def test_empty_above_seminorm(self):
        spec = GridSpec(n=1, J=6)
        f = sample(lambda x: np.sin(2 * np.pi * x), spec)
        cfg = DiffConfig(r=1, s=0.5)
        _, semi = lip_norm(f, cfg)
        assert bad_set(f, cfg, semi).is_empty()      # strict > threshold
        assert not bad_set(f, cfg, semi * 0.5).is_empty()

    def test_monotone_in_eps(self):
        spec = GridSpec(n=1, J=6)
        f = sample(lambda x: np.sin(2 * np.pi * x), spec)
        cfg = DiffConfig(r=1, s=0.5)
        small = bad_set(f, cfg, 0.2)
        large = bad_set(f, cfg, 0.4)
        assert large.subset_violations(small) == 0
        assert large.cell_count() <= small.cell_count()

    @settings(max_examples=15, deadline=None)
    @given(k=st.integers(-3, 3))
    def test_dyadic_homogeneity_is_exact(self, k):
        spec = GridSpec(n=1, J=6)
        f = sample(lambda x: np.sin(2 * np.pi * x) + 0.2 * np.cos(8 * np.pi * x),
                   spec)
        cfg = DiffConfig(r=1, s=0.5)
        c = 2.0**k
        a = bad_set(f, cfg, 0.3)
        b = bad_set(f.scaled(c), cfg, 0.3 * c)
        assert all(np.array_equal(x, y) for x, y in zip(a.masks, b.masks))

    def test_levels_match_grid(self):
        spec = GridSpec(n=1, J=5)
        f = sample(lambda x: np.sin(2 * np.pi * x), spec)
        m = bad_set(f, DiffConfig(r=1, s=0.5), 0.1)
        assert m.n_levels == spec.J
        assert len(ratio_fields(f, DiffConfig(r=1, s=0.5))) == spec.J


class TestRegionMask:
    def _mask(self, spec, M=4, fill=False):
        m = RegionMask.empty(spec, M, spec.J)
        if fill:
            for a in m.masks:
                a[...] = True
        return m

    def test_band_edges_have_exact_log_width(self):
        spec = GridSpec(n=1, J=4)
        m = self._mask(spec)
        for j in range(m.n_levels):
            edges = m.band_edges(j)
            w = np.diff(np.log(edges))
            assert np.allclose(w, math.log(2) / m.M, atol=1e-12)

    def test_union_and_subset(self):
        spec = GridSpec(n=1, J=4)
        a = self._mask(spec)
        b = self._mask(spec)
        a.masks[0][0, 3] = True
        b.masks[1][2, 5] = True
        u = a.union(b)
        assert u.cell_count() == 2
        assert a.subset_violations(u) == 0
        assert u.subset_violations(a) == 1

    def test_counting_helpers(self):
        spec = GridSpec(n=1, J=3)
        m = self._mask(spec, fill=True)
        assert m.cell_count() == m.M * spec.J * spec.samples_per_axis
        assert m.level_nonempty() == [True] * spec.J
        assert not m.is_empty()

    def test_rle_roundtrip_shape(self):
        spec = GridSpec(n=1, J=4)
        m = self._mask(spec)
        m.masks[2][1, 4:9] = True
        obj = m.to_rle_json()
        assert obj["J"] == m.n_levels and obj["M"] == m.M
        marked = 0
        for lvl in obj["levels"]:
            start = lvl["start"]
            marked += sum(lvl["runs"][(1 - start)::2])
        assert marked == m.cell_count()


class TestWhitney:
    def test_polynomial_gap_is_tiny(self):
        from lipdev.grid import DyadicCube
        spec = GridSpec(n=1, J=6)
        f = sample(lambda x: np.full_like(x, 0.7), spec)   # degree < r = 1
        cube = DyadicCube(2, (1,))
        lhs, rhs = whitney_gap(f, cube, DiffConfig(r=1, s=0.5), A0=4.0)
        assert lhs <= 1e-10

    def test_gap_scales_linearly(self):
        from lipdev.grid import DyadicCube
        spec = GridSpec(n=1, J=6)
        f = sample(lambda x: np.sin(2 * np.pi * x), spec)
        cube = DyadicCube(2, (2,))
        cfg = DiffConfig(r=1, s=0.5)
        l1, r1 = whitney_gap(f, cube, cfg, A0=4.0)
        l2, r2 = whitney_gap(f.scaled(2.0), cube, cfg, A0=4.0)
        assert l2 == pytest.approx(2 * l1, rel=1e-9)
        assert r2 == pytest.approx(2 * r1, rel=1e-12)
