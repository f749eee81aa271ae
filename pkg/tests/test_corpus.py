import numpy as np
import pytest

from lipdev.corpus import CorpusEntry, ExpectedVerdict, corpus_names, make_entry
from lipdev.difference import DiffConfig
from lipdev.deviation import (_is_wavelet_preset, mass_curve, parse_preset,
                              wavelet_mass_curve)
from lipdev.wavelet import coeff_norm_binf


class TestConstruction:
    def test_all_names_build(self):
        for name in corpus_names():
            e = make_entry(name, J=6)
            assert e.spec.J == 6
            assert e.func.values.shape == e.spec.shape

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown corpus entry"):
            make_entry("sinc")

    def test_verdict_validation(self):
        with pytest.raises(ValueError, match="verdict"):
            ExpectedVerdict("diverges", (0.25,))

    def test_flat_norm_is_exactly_one(self):
        for J in (6, 8, 10):
            e = make_entry("flat_coeffs", J=J)
            assert coeff_norm_binf(e.coeffs, 0.5) == 1.0

    def test_log_weights_damp_levels(self):
        e = make_entry("log_coeffs", J=8, a=0.5)
        c = e.coeffs
        v0 = float(c.details[1][1].flat[0])
        v4 = float(c.details[4][1].flat[0])
        assert v4 / v0 == pytest.approx((4.0 / 1.0) ** -0.5 * 2.0 ** -3,
                                        rel=1e-12)


class TestRegenerate:
    def test_regenerate_matches_direct_construction(self):
        e = make_entry("gaussian", J=8)
        r = e.regenerate(6)
        assert r.spec.J == 6 and r.name == e.name and r.params == e.params
        direct = make_entry("gaussian", J=6)
        assert np.array_equal(r.func.values, direct.func.values)

    def test_lacunary_terms_track_resolution_by_default(self):
        e = make_entry("lacunary", J=8)
        assert e.params["terms"] == 0
        r = e.regenerate(6)
        # fewer levels -> fewer terms than a J=8-matched construction
        frozen = make_entry("lacunary", J=6, terms=7)
        assert not np.allclose(r.func.values, frozen.func.values, atol=1e-6)

    def test_lacunary_explicit_terms_preserved(self):
        e = make_entry("lacunary", J=8, terms=4)
        r = e.regenerate(6)
        assert r.params["terms"] == 4
        direct = make_entry("lacunary", J=6, terms=4)
        assert np.array_equal(r.func.values, direct.func.values)

    def test_scaled_entry_scales_everything(self):
        e = make_entry("flat_coeffs", J=6)
        d = e.scaled(2.0)
        assert np.array_equal(d.func.values, 2.0 * e.func.values)
        assert coeff_norm_binf(d.coeffs, 0.5) == 2.0
        rr = d.regenerate(8)                  # the scale survives regeneration
        assert coeff_norm_binf(rr.coeffs, 0.5) == 2.0


class TestExpectedVerdicts:
    @pytest.mark.parametrize("name", corpus_names())
    def test_classifier_agrees(self, name):
        e = make_entry(name, J=10)
        assert e.expected, f"entry {name} carries no expectations"
        for label, exp in e.expected.items():
            p = parse_preset(label)
            s = float(e.params.get("s", 0.5))
            eps = sorted(exp.eps)
            if _is_wavelet_preset(p):
                curve = wavelet_mass_curve(e, s, p, eps)
            else:
                curve = mass_curve(e, DiffConfig(r=1, s=s), p, eps)
            got = "divergent" if curve.verdicts().any() else "finite"
            assert got == exp.verdict, f"{name}/{label}"
