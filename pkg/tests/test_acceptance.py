"""End-to-end acceptance checks: exact values, property bounds, stability and
determinism of the full pipeline."""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from lipdev.grid import DyadicCube, GridSpec, SampledFunction, sample
from lipdev.wavelet import analyze, coeff_norm_binf, default_system, synthesize
from lipdev.difference import DiffConfig, RegionMask, bad_set, lip_norm
from lipdev.hyperbolic import HalfSpacePoint, ball_box_bounds, rho, rho_ln
from lipdev.lattice import carleson_M, stack_from_badset, stack_from_cubes
from lipdev.corpus import corpus_names, make_entry
from lipdev.deviation import (closure_test, default_eps_grid,
                              distance_estimate, inclusion_experiment,
                              mass_curve, parse_preset, wavelet_mass_curve)

LN2 = math.log(2.0)
CFG = DiffConfig(r=1, s=0.5)


# --------------------------------------------------------------- criterion 1 --

class TestWaveletCorrectness:
    def test_random_signals_parseval_and_reconstruction(self):
        sys_ = default_system(1, 0.5)
        spec = GridSpec(n=1, J=10)
        rng = np.random.default_rng(2024)
        t0 = time.monotonic()
        for _ in range(100):
            f = SampledFunction(spec, rng.standard_normal(spec.shape))
            c = analyze(f, sys_)
            l2 = f.l2_norm_sq()
            assert abs(c.sum_sq() - l2) / l2 <= 1e-9
            g = synthesize(c)
            assert np.max(np.abs(g.values - f.values)) <= 1e-10 * f.sup_norm()
        elapsed = time.monotonic() - t0
        assert elapsed <= 100.0          # well under 1 s per signal

    def test_polynomials_yield_tiny_interior_details(self):
        sys_ = default_system(1, 0.5)          # N = 3 vanishing moments
        spec = GridSpec(n=1, J=10, ext="zero")
        F = len(sys_.h)
        for coefs in ([1.0], [0.2, 1.0], [0.1, -1.0, 2.0]):   # degree < N
            f = sample(lambda x: np.polyval(coefs, x), spec)
            c = analyze(f, sys_)
            for j, _g, arr, off in c.iter_detail_bands():
                k = np.arange(arr.shape[0]) + off[0]
                lo = 2.0 * F * spec.spacing
                interior = (k * 2.0**-j >= lo) & (
                    (k + F) * 2.0**-j <= spec.box_side - lo)
                if interior.any():
                    assert np.max(np.abs(arr[interior])) <= 1e-8 * f.sup_norm()


# --------------------------------------------------------------- criterion 2 --

class TestHyperbolicFormulas:
    def test_formulas_agree_and_metric_axioms_hold(self):
        rng = np.random.default_rng(7)
        N = 100_000
        x = rng.uniform(-2, 2, (3, N, 1))
        y = np.exp(rng.uniform(np.log(1e-3), np.log(10.0), (3, N)))

        d1 = rho((x[0], y[0]), (x[1], y[1]))
        d2 = rho_ln((x[0], y[0]), (x[1], y[1]))
        assert np.max(np.abs(d1 - d2) / d1) <= 1e-10

        ab = d1
        bc = rho((x[1], y[1]), (x[2], y[2]))
        ac = rho((x[0], y[0]), (x[2], y[2]))
        assert np.max(ac - (ab + bc)) <= 1e-12

        dv = rho((x[0], y[0]), (x[0], y[1]))
        assert np.max(np.abs(dv - np.abs(np.log(y[1] / y[0])))) <= 1e-12


# --------------------------------------------------------------- criterion 3 --

class TestBallBoxInclusions:
    def test_sandwich_zero_violations(self):
        rng = np.random.default_rng(99)
        N, P = 10_000, 100
        zx = rng.uniform(-1, 1, N)
        zy = np.exp(rng.uniform(np.log(1e-2), 0.0, N))
        t = rng.uniform(1e-4, 0.25, N)

        # inner box T(z, t/4) must lie inside the ball
        u = rng.uniform(-1, 1, (N, P))
        v = rng.uniform(-1, 1, (N, P))
        px = zx[:, None] + u * (t / 4.0 * zy)[:, None]
        py = zy[:, None] * (1.0 + v * (t / 4.0)[:, None])
        d = rho((px[..., None], py), (zx[:, None, None], zy[:, None]))
        assert int(np.count_nonzero(d > t[:, None])) == 0

        # ball must lie inside the outer box T(z, 2t): sample a wider box,
        # keep the in-ball points, check box membership
        qx = zx[:, None] + rng.uniform(-1, 1, (N, P)) * (3 * t * zy)[:, None]
        qy = zy[:, None] * (1.0 + rng.uniform(-1, 1, (N, P)) * np.minimum(
            3 * t, 0.95)[:, None])
        d = rho((qx[..., None], qy), (zx[:, None, None], zy[:, None]))
        inball = d <= t[:, None]
        in_box = ((np.abs(qx - zx[:, None]) <= (2 * t * zy)[:, None])
                  & (qy >= ((1 - 2 * t) * zy)[:, None])
                  & (qy <= ((1 + 2 * t) * zy)[:, None]))
        assert int(np.count_nonzero(inball & ~in_box)) == 0

    @pytest.mark.parametrize("delta", [0.05, 0.1, 0.25])
    def test_ball_measure_ratio_in_band(self, delta):
        rng = np.random.default_rng(int(delta * 1000))
        for _ in range(30):
            z = HalfSpacePoint((float(rng.uniform(-1, 1)),),
                               float(np.exp(rng.uniform(np.log(0.2),
                                                        np.log(5.0)))))
            # Monte Carlo of the dx dy / y mass over the outer bounding box
            M = 40_000
            half_w = 2 * delta * z.y
            qx = rng.uniform(z.x[0] - half_w, z.x[0] + half_w, M)
            qy = rng.uniform((1 - 2 * delta) * z.y, (1 + 2 * delta) * z.y, M)
            area = 2 * half_w * (4 * delta * z.y)
            d = rho((qx[:, None], qy), z)
            mu = area * float(np.mean(np.where(d <= delta, 1.0 / qy, 0.0)))
            ratio = mu / (delta * (z.y * delta))
            assert 0.05 <= ratio <= 20.0


# --------------------------------------------------------------- criterion 4 --

class TestExactCarlesonValues:
    def test_single_tents_give_log2(self):
        spec = GridSpec(n=1, J=10)
        rng = np.random.default_rng(5)
        cases = [(j, int(rng.integers(0, 1 << j))) for j in range(10)
                 for _ in range(2)]
        assert len(cases) == 20
        for j, k in cases:
            cubes = [[] for _ in range(spec.J)]
            cubes[j] = [DyadicCube(j, (k,))]
            stack = stack_from_cubes(spec, cubes, weight=LN2)
            assert carleson_M(stack) == pytest.approx(LN2, abs=1e-12)

    @pytest.mark.parametrize("J", [6, 8, 10])
    def test_full_slab_value(self, J):
        spec = GridSpec(n=1, J=J)
        m = RegionMask.empty(spec, 4, J + 1)
        for a in m.masks:
            a[...] = True
        assert carleson_M(stack_from_badset(m)) == pytest.approx(
            (J + 1) * LN2, abs=1e-12)


# --------------------------------------------------------------- criterion 5 --

class TestCorpusDivergenceSignatures:
    def test_flat_level_count_slope_is_log2(self):
        p = parse_preset("nu_m")
        vals = []
        for J in (8, 10, 12):
            e = make_entry("flat_coeffs", J=J)
            c = mass_curve(e, CFG, p, [0.25], resolutions=(J,))
            vals.append(float(c.values[0, 0]))
        slope = float(np.polyfit([8, 10, 12], vals, 1)[0])
        assert 0.8 * LN2 <= slope <= 1.2 * LN2

    def test_flat_wavelet_distance_is_exactly_one(self):
        e = make_entry("flat_coeffs", J=12)
        rep = distance_estimate(e, CFG, "besov:2,2")
        assert rep.d0_flag == "ok"
        assert rep.d0 == 1.0

    def test_log_damped_at_half_threshold_saturates_cap(self):
        eps = 0.5
        vals = []
        for J in (8, 12):
            e = make_entry("log_coeffs", J=J, a=0.5)
            c = wavelet_mass_curve(e, 0.5, parse_preset("nu_m"), [eps],
                                   resolutions=(J,))
            vals.append(float(c.values[0, 0]))
        assert vals[1] / vals[0] <= 1.1
        assert vals[1] <= LN2 * math.ceil(eps**-2) + 1e-12

    @pytest.mark.xfail(strict=True, reason=(
        "unattainable at these resolutions: with weights j^-0.5 the "
        "threshold 1/4 keeps every level j < 16 active, so the level-count "
        "functional is exactly 12*ln2 at J=12 vs 8*ln2 at J=8 and the "
        "ratio is 3/2 > 1.1 for every J < 16"))
    def test_log_damped_at_quarter_threshold_ratio(self):
        eps = 0.25
        vals = []
        for J in (8, 12):
            e = make_entry("log_coeffs", J=J, a=0.5)
            c = wavelet_mass_curve(e, 0.5, parse_preset("nu_m"), [eps],
                                   resolutions=(J,))
            vals.append(float(c.values[0, 0]))
        assert vals[1] <= LN2 * math.ceil(eps**-2) + 1e-12    # cap holds
        assert vals[1] / vals[0] <= 1.1                        # honest red

    def test_log_damped_at_quarter_threshold_respects_cap(self):
        eps = 0.25
        e = make_entry("log_coeffs", J=12, a=0.5)
        c = wavelet_mass_curve(e, 0.5, parse_preset("nu_m"), [eps],
                               resolutions=(12,))
        assert float(c.values[0, 0]) <= LN2 * math.ceil(eps**-2) + 1e-12


# --------------------------------------------------------------- criterion 6 --

class TestSmoothMemberFloor:
    def test_gaussian_floors_and_passes_closure(self):
        t0 = time.monotonic()
        g = make_entry("gaussian", J=12)
        for preset in ("jsbmo", "besov:2,2", "triebel:2,2"):
            rep = distance_estimate(g, CFG, preset)
            assert rep.eps_hat <= rep.diff_curve.eps[1]
            _, verdict = closure_test(g, CFG, preset, [0.25, 0.5])
            assert verdict == "member"
        assert time.monotonic() - t0 <= 30.0


# --------------------------------------------------------------- criterion 7 --

class TestEquivalenceBandStability:
    @pytest.mark.parametrize("preset", ["jsbmo", "besov:2,2", "triebel:2,2"])
    def test_band_width_stable_between_resolutions(self, preset):
        bands = {}
        for J in (10, 12):
            ratios = []
            for name in corpus_names():
                e = make_entry(name, J=J)
                s = float(e.params.get("s", 0.5))
                rep = distance_estimate(e, DiffConfig(r=1, s=s), preset)
                if rep.ratio is not None and rep.ratio > 0:
                    ratios.append(rep.ratio)
            assert ratios, "no resolved corpus ratios"
            bands[J] = max(ratios) / min(ratios)
        change = abs(bands[12] / bands[10] - 1.0)
        assert change <= 0.25


# --------------------------------------------------------------- criterion 8 --

class TestHomogeneityExactness:
    @pytest.mark.parametrize("name", corpus_names())
    def test_doubling_scales_both_estimates_exactly(self, name):
        e = make_entry(name, J=10)
        s = float(e.params.get("s", 0.5))
        cfg = DiffConfig(r=1, s=s)
        r1 = distance_estimate(e, cfg, "jsbmo")
        r2 = distance_estimate(e.scaled(2.0), cfg, "jsbmo")
        assert r2.eps_hat == 2.0 * r1.eps_hat
        assert r2.d0 == 2.0 * r1.d0


# --------------------------------------------------------------- criterion 9 --

class TestInclusionExperiments:
    def test_flat_has_violation_free_cell_and_monotone_fractions(self):
        e = make_entry("flat_coeffs", J=10)
        res = inclusion_experiment(
            e.func, CFG, 0.5,
            c_grid=[0.125, 0.25, 0.375, 0.5],
            R_grid=[float(k) for k in range(1, 11)], m_max=4,
            j_range=range(1, 8))                       # 1 <= j <= J - 3
        assert res["best"] is not None
        assert res["best"]["R"] <= 10 and res["best"]["m"] <= 4

        by_key = {}
        for row in res["rows"]:
            by_key.setdefault((row["c"], row["m"]), []).append(
                (row["R"], row["frac_a"] + row["frac_b"]))
        for pairs in by_key.values():
            pairs.sort()
            fr = [v for _, v in pairs]
            assert all(b <= a for a, b in zip(fr, fr[1:]))   # exact


# -------------------------------------------------------------- criterion 10 --

class TestDeterminism:
    def test_byte_identical_outputs_across_thread_counts(self, tmp_path):
        cfg = {
            "grid": {"n": 1, "J": 8},
            "diff": {"r": 1, "s": 0.5},
            "presets": ["jsbmo", "besov:2,2"],
            "eps": [0.25, 0.5],
            "entries": ["gaussian", "poly", "flat_coeffs"],
            "seed": 11,
            "hypcheck": {"pairs": 5000, "triples": 5000, "boxes": 100,
                         "box_points": 20},
        }
        cfg_path = tmp_path / "job.json"
        cfg_path.write_text(json.dumps(cfg))
        blobs = {}
        for t in (1, 4, 8):
            out = tmp_path / f"out{t}"
            for cmd in ("deviation", "corpus", "hypcheck"):
                r = subprocess.run(
                    [sys.executable, "-m", "lipdev.cli", cmd,
                     "--config", str(cfg_path), "--out", str(out),
                     "--threads", str(t)],
                    capture_output=True, text=True)
                assert r.returncode == 0, r.stderr
            blobs[t] = {
                name: (out / name).read_bytes()
                for name in sorted(os.listdir(out))}
        assert blobs[1] == blobs[4] == blobs[8]
