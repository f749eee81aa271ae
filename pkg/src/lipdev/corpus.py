"""Reference input corpus.

Each entry bundles a sampled function, optionally the exact coefficient
family it was synthesized from (so coefficient-side functionals are free of
transform round-off), the expected finite/divergent verdicts per functional
preset at stated thresholds, and a regeneration hook that rebuilds the same
entry at another resolution (used by the multi-resolution mass curves, which
must not resample by interpolation when an exact generator exists).

Entries
-------
flat_coeffs(s):    every detail coefficient equals 2^(-j (s + n/2)) - the
                   normalized coefficient size is exactly 1 at every cube, so
                   super-level families are all-of-D for eps < 1 and empty for
                   eps >= 1.
log_coeffs(s, a):  same but damped by j^-a, so only levels j < eps^(-1/a)
                   survive thresholding: every stack functional stays bounded.
gaussian(c, w):    exp(-|x - c|^2 / w^2), a C^inf bump; all bad sets decay.
lacunary(s, base): sum_j base^(-j s) cos(2 pi base^j x): critical smoothness
                   s with activity at every scale.
poly:              prod_ax x(1 - x); smooth, low degree.
const:             1; every difference vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from lipdev.grid import GridSpec, SampledFunction, sample
from lipdev.wavelet import (WaveletCoefficients, WaveletSystem, default_system,
                            prescribed_coefficients, synthesize)

__all__ = ["ExpectedVerdict", "CorpusEntry", "make_entry", "corpus_names"]


@dataclass(frozen=True)
class ExpectedVerdict:
    """What the divergence classifier should say for this entry at the given
    thresholds (all thresholds share one verdict)."""

    verdict: str                    # "finite" or "divergent"
    eps: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.verdict not in ("finite", "divergent"):
            raise ValueError(f"unknown verdict {self.verdict!r}")


@dataclass
class CorpusEntry:
    name: str
    params: dict
    spec: GridSpec
    func: SampledFunction
    system: WaveletSystem
    coeffs: WaveletCoefficients | None
    expected: dict[str, ExpectedVerdict] = field(default_factory=dict)
    scale: float = 1.0

    def regenerate(self, J: int) -> "CorpusEntry":
        """The same entry on a grid with finest level J (exact, no resampling)."""
        base = make_entry(self.name, n=self.spec.n, J=J, K=self.spec.K,
                          ext=self.spec.ext, **self.params)
        return base.scaled(self.scale) if self.scale != 1.0 else base

    def scaled(self, factor: float) -> "CorpusEntry":
        """The entry for factor * f: samples and coefficients both scale."""
        return CorpusEntry(
            name=self.name, params=self.params, spec=self.spec,
            func=SampledFunction(self.spec, self.func.values * factor),
            system=self.system,
            coeffs=self.coeffs.scaled(factor) if self.coeffs is not None else None,
            expected=self.expected, scale=self.scale * factor)


def _coeff_entry(name: str, params: dict, spec: GridSpec, sys: WaveletSystem,
                 weight_of_level: Callable[[int], float], s: float,
                 expected: dict[str, ExpectedVerdict]) -> CorpusEntry:
    n = spec.n
    details: dict[int, dict[int, np.ndarray]] = {}
    for j in range(spec.J):
        per_axis = 1 << (spec.K + j)
        v = weight_of_level(j) * 2.0 ** (-j * (s + n / 2.0))
        arr = np.full((per_axis,) * n, v)
        details[j] = {g: arr.copy() for g in range(1, 1 << n)}
    coeffs = prescribed_coefficients(spec, sys, details)
    return CorpusEntry(name=name, params=params, spec=spec,
                       func=synthesize(coeffs), system=sys, coeffs=coeffs,
                       expected=expected)


def make_entry(name: str, n: int = 1, J: int = 10, K: int = 0,
               ext: str = "periodic", **params) -> CorpusEntry:
    spec = GridSpec(n=n, J=J, K=K, ext=ext)
    if name == "flat_coeffs":
        s = float(params.setdefault("s", 0.5))
        sys = default_system(1, s)
        expected = {
            "besov:2,2": ExpectedVerdict("divergent", (0.25, 0.5)),
            "triebel:2,2": ExpectedVerdict("divergent", (0.25, 0.5)),
            "besov_inf": ExpectedVerdict("divergent", (0.25, 0.5)),
            "nu_count": ExpectedVerdict("divergent", (0.25, 0.5)),
        }
        return _coeff_entry(name, dict(params), spec, sys, lambda j: 1.0, s, expected)

    if name == "log_coeffs":
        s = float(params.setdefault("s", 0.5))
        a = float(params.setdefault("a", 1.0))
        sys = default_system(1, s)
        expected = {
            "nu_m": ExpectedVerdict("finite", (0.25, 0.5)),
            "nu_count": ExpectedVerdict("finite", (0.25, 0.5)),
        }
        return _coeff_entry(name, dict(params), spec, sys,
                            lambda j: 1.0 if j == 0 else float(j) ** (-a), s,
                            expected)

    if name == "gaussian":
        width = float(params.setdefault("width", 0.125))
        center = params.setdefault("center", tuple([0.5 * spec.box_side] * n))
        c = np.asarray(center, dtype=float)
        if n == 1:
            f = sample(lambda x: np.exp(-((x - c[0]) / width) ** 2), spec)
        else:
            f = sample(lambda x, y: np.exp(-(((x - c[0]) ** 2 + (y - c[1]) ** 2)
                                             / width**2)), spec)
        expected = {
            "jsbmo": ExpectedVerdict("finite", (0.25, 0.5)),
            "besov:2,2": ExpectedVerdict("finite", (0.25, 0.5)),
            "triebel:2,2": ExpectedVerdict("finite", (0.25, 0.5)),
        }
        return CorpusEntry(name=name, params=dict(params), spec=spec, func=f,
                           system=default_system(1, 0.5), coeffs=None,
                           expected=expected)

    if name == "lacunary":
        s = float(params.setdefault("s", 0.5))
        base = int(params.setdefault("base", 2))
        terms = int(params.get("terms") or 0) or max(J - 1, 1)
        params.setdefault("terms", 0)   # 0: resolution-matched term count
        js = np.arange(terms)
        amps = float(base) ** (-js * s)
        freqs = float(base) ** js

        def w1(x):
            return np.sum(amps[:, None]
                          * np.cos(2 * np.pi * freqs[:, None] * x[None, :]), axis=0)

        if n == 1:
            f = sample(w1, spec)
        else:
            f = sample(lambda x, y: (np.sum(
                amps[:, None, None] * np.cos(
                    2 * np.pi * freqs[:, None, None] * (x + y)[None]), axis=0)), spec)
        expected = {"nu_count": ExpectedVerdict("divergent", (0.125,))}
        return CorpusEntry(name=name, params=dict(params), spec=spec, func=f,
                           system=default_system(1, s), coeffs=None,
                           expected=expected)

    if name == "poly":
        side = spec.box_side
        if n == 1:
            f = sample(lambda x: x * (side - x), spec)
        else:
            f = sample(lambda x, y: x * (side - x) * y * (side - y), spec)
        expected = {
            "jsbmo": ExpectedVerdict("finite", (0.25,)),
            "besov:2,2": ExpectedVerdict("finite", (0.25,)),
        }
        return CorpusEntry(name=name, params=dict(params), spec=spec, func=f,
                           system=default_system(1, 0.5), coeffs=None,
                           expected=expected)

    if name == "const":
        f = SampledFunction(spec, np.ones(spec.shape))
        expected = {
            "jsbmo": ExpectedVerdict("finite", (0.25, 0.5)),
            "besov:2,2": ExpectedVerdict("finite", (0.25, 0.5)),
            "nu_m": ExpectedVerdict("finite", (0.25, 0.5)),
        }
        return CorpusEntry(name=name, params=dict(params), spec=spec, func=f,
                           system=default_system(1, 0.5), coeffs=None,
                           expected=expected)

    raise ValueError(f"unknown corpus entry {name!r}; choices: {corpus_names()}")


def corpus_names() -> tuple[str, ...]:
    return ("flat_coeffs", "log_coeffs", "gaussian", "lacunary", "poly", "const")
