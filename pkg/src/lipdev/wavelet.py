"""Orthonormal Daubechies multiresolution analysis on the dyadic grid.

The transform is the exact discrete orthonormal cascade:

* periodic mode folds the filters circularly at every stage (the periodized
  system stays orthonormal at all lengths, since the filter autocorrelation
  vanishes at even lags and every stage length is even);
* zero mode runs the cascade on the zero-extended signal over Z, keeping all
  nonzero coefficients, so per-level index ranges extend beyond the box by
  the filter support and Parseval / perfect reconstruction hold exactly.

Coefficient (level j, position k) is attached to the dyadic cube
2^-j ([0,1)^n + k); scaling coefficients live at level 0.  phi / psi point
values, when needed, come from synthesizing a unit coefficient - there is no
separate cascade evaluator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
from scipy.special import comb

from lipdev.grid import GridSpec, SampledFunction

__all__ = [
    "WaveletSystem",
    "WaveletCoefficients",
    "CubeFamilies",
    "ScalingTail",
    "daubechies_filter",
    "default_system",
    "analyze",
    "synthesize",
    "coeff_norm_binf",
    "superlevel_sets",
    "threshold_approx",
    "scaling_tail",
]

# Declared Hoelder regularity per Db-N family (standard tabulation; used only
# to refuse smoothness parameters the basis cannot certify).
HOLDER_EXPONENTS = {
    1: 0.0, 2: 0.550, 3: 1.088, 4: 1.275, 5: 1.596,
    6: 1.888, 7: 2.158, 8: 2.460, 9: 2.761, 10: 3.061,
}


def daubechies_filter(N: int) -> np.ndarray:
    """Minimum-phase Daubechies low-pass filter with N vanishing moments.

    Spectral factorization: the roots of P(y) = sum_k C(N-1+k, k) y^k are
    mapped to z via y = (2 - z - 1/z)/4 and the factor inside the unit circle
    is kept, together with the N-fold zero at z = -1.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N == 1:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    k = np.arange(N)
    p_coeffs = comb(N - 1 + k, k)          # P(y), ascending powers
    y_roots = np.roots(p_coeffs[::-1])
    z_roots = []
    for y in y_roots:
        b = 2.0 - 4.0 * y                  # z + 1/z = b
        sq = np.sqrt(b * b / 4.0 - 1.0 + 0j)
        z1, z2 = b / 2.0 + sq, b / 2.0 - sq
        z_roots.append(z1 if abs(z1) < 1.0 else z2)
    h = np.poly([-1.0] * N + z_roots).real
    h *= np.sqrt(2.0) / h.sum()
    return h


def _qmf(h: np.ndarray) -> np.ndarray:
    """Conjugate quadrature high-pass: g[i] = (-1)^i h[F-1-i]."""
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


@dataclass(frozen=True)
class WaveletSystem:
    """Daubechies family Db-N: low-pass filter plus declared regularity."""

    N: int
    h: np.ndarray = field(repr=False)
    L_eff: float

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.float64)
        if len(h) != 2 * self.N:
            raise ValueError(f"Db-{self.N} filter must have {2 * self.N} taps")
        if abs(h.sum() - np.sqrt(2.0)) > 1e-12:
            raise ValueError("low-pass filter does not sum to sqrt(2)")
        for m in range(1, self.N):
            if abs(np.dot(h[: len(h) - 2 * m], h[2 * m:])) > 1e-12:
                raise ValueError("filter autocorrelation not delta at even lags")
        if abs(np.dot(h, h) - 1.0) > 1e-12:
            raise ValueError("filter is not unit-norm")
        object.__setattr__(self, "h", h)

    @classmethod
    def daubechies(cls, N: int) -> "WaveletSystem":
        L_eff = HOLDER_EXPONENTS.get(N)
        if L_eff is None:
            # Asymptotically the exponent grows by about 0.2 per extra moment.
            L_eff = HOLDER_EXPONENTS[10] + 0.2 * (N - 10)
        return cls(N=N, h=daubechies_filter(N), L_eff=L_eff)

    @property
    def g(self) -> np.ndarray:
        return _qmf(self.h)

    def genders(self, n: int) -> int:
        return (1 << n) - 1


def default_system(r: int, s: float) -> WaveletSystem:
    """Default family covering both difference order r and smoothness s:
    N = max(r, ceil(s) + 2) vanishing moments."""
    N = max(int(r), int(np.ceil(s)) + 2)
    return WaveletSystem.daubechies(max(N, 2))


class ScalingTail(NamedTuple):
    value: float
    positions: int        # how many scaling positions were inspected


@dataclass
class WaveletCoefficients:
    """Critically indexed coefficient family {<f, psi_omega>}.

    ``details[j][gender]`` holds level-j detail coefficients (gender 1 for
    n=1; genders 1=LH, 2=HL, 3=HH for n=2); ``detail_off[j]`` is the global
    index of the first stored position per axis (always 0 in periodic mode).
    ``scaling`` holds the level-0 scaling part (index set Omega_0).
    """

    spec: GridSpec
    system: WaveletSystem
    scaling: np.ndarray
    scaling_off: tuple[int, ...]
    details: dict[int, dict[int, np.ndarray]]
    detail_off: dict[int, tuple[int, ...]]

    def coefficient_count(self) -> int:
        total = self.scaling.size
        for bands in self.details.values():
            for arr in bands.values():
                total += arr.size
        return total

    def sum_sq(self) -> float:
        total = float(np.sum(self.scaling**2))
        for bands in self.details.values():
            for arr in bands.values():
                total += float(np.sum(arr**2))
        return total

    def iter_detail_bands(self) -> Iterator[tuple[int, int, np.ndarray, tuple[int, ...]]]:
        for j in sorted(self.details):
            for gender in sorted(self.details[j]):
                yield j, gender, self.details[j][gender], self.detail_off[j]

    def scaled(self, factor: float) -> "WaveletCoefficients":
        return WaveletCoefficients(
            spec=self.spec, system=self.system,
            scaling=self.scaling * factor, scaling_off=self.scaling_off,
            details={j: {g: arr * factor for g, arr in bands.items()}
                     for j, bands in self.details.items()},
            detail_off=dict(self.detail_off),
        )


# ----------------------------------------------------------------- stages --

def _stage_analyze_axis(arr: np.ndarray, off: int, axis: int,
                        h: np.ndarray, g: np.ndarray, periodic: bool
                        ) -> tuple[np.ndarray, np.ndarray, int]:
    """One filter-and-downsample stage along ``axis``.

    Returns (low, high, output offset along axis).  Output positions k hold
    sum_i filt[i] * a(2k + i) in global coordinates.
    """
    a = np.moveaxis(arr, axis, -1)
    F = len(h)
    if periodic:
        L = a.shape[-1]
        lo = np.zeros(a.shape[:-1] + (L // 2,))
        hi = np.zeros_like(lo)
        for i in range(F):
            shifted = np.roll(a, -i, axis=-1)[..., ::2]
            lo += h[i] * shifted
            hi += g[i] * shifted
        k0 = 0
    else:
        L = a.shape[-1]
        pad = [(0, 0)] * (a.ndim - 1) + [(F - 1, F - 1)]
        padded = np.pad(a, pad)
        k0 = -((F - 1 - off) // 2)              # ceil((off - F + 1) / 2)
        k1 = (off + L - 1) // 2
        LA = k1 - k0 + 1
        m0 = 2 * k0 - off + F - 1
        lo = np.zeros(a.shape[:-1] + (LA,))
        hi = np.zeros_like(lo)
        for i in range(F):
            sl = padded[..., m0 + i: m0 + i + 2 * LA - 1: 2]
            lo += h[i] * sl
            hi += g[i] * sl
    return np.moveaxis(lo, -1, axis), np.moveaxis(hi, -1, axis), k0


def _stage_synth_axis(lo: np.ndarray, lo_off: int, hi: np.ndarray, hi_off: int,
                      axis: int, h: np.ndarray, g: np.ndarray, periodic: bool
                      ) -> tuple[np.ndarray, int]:
    """Adjoint of the analysis stage: upsample, filter, sum the two branches."""
    a = np.moveaxis(lo, axis, -1)
    d = np.moveaxis(hi, axis, -1)
    F = len(h)
    if periodic:
        L = 2 * a.shape[-1]
        out = np.zeros(a.shape[:-1] + (L,))
        ua = np.zeros_like(out)
        ud = np.zeros_like(out)
        ua[..., ::2] = a
        ud[..., ::2] = d
        for i in range(F):
            out += h[i] * np.roll(ua, i, axis=-1) + g[i] * np.roll(ud, i, axis=-1)
        o0 = 0
    else:
        t_lo = 2 * lo_off
        t_hi = 2 * hi_off
        o0 = min(t_lo, t_hi)
        t_end = max(t_lo + 2 * (a.shape[-1] - 1), t_hi + 2 * (d.shape[-1] - 1)) + F - 1
        out = np.zeros(a.shape[:-1] + (t_end - o0 + 1,))
        for i in range(F):
            s = t_lo + i - o0
            out[..., s: s + 2 * a.shape[-1] - 1: 2] += h[i] * a
            s = t_hi + i - o0
            out[..., s: s + 2 * d.shape[-1] - 1: 2] += g[i] * d
    return np.moveaxis(out, -1, axis), o0


def _align_bands(bands: list[tuple[np.ndarray, tuple[int, ...]]]
                 ) -> tuple[list[np.ndarray], tuple[int, ...]]:
    """Zero-pad bands to a common global index range (zero mode only)."""
    n = bands[0][0].ndim
    lo = tuple(min(off[ax] for _, off in bands) for ax in range(n))
    hi = tuple(max(off[ax] + arr.shape[ax] for arr, off in bands) for ax in range(n))
    out = []
    for arr, off in bands:
        pad = [(off[ax] - lo[ax], hi[ax] - off[ax] - arr.shape[ax]) for ax in range(n)]
        out.append(np.pad(arr, pad))
    return out, lo


# -------------------------------------------------------------- transform --

def _check_compat(spec: GridSpec, sys: WaveletSystem) -> None:
    if 2 * sys.N > spec.samples_per_axis:
        raise ValueError(
            f"filter support {2 * sys.N} wider than axis length "
            f"{spec.samples_per_axis}: refine the grid or pick a smaller family")


def analyze(f: SampledFunction, sys: WaveletSystem) -> WaveletCoefficients:
    """Forward orthonormal transform down to level-0 scaling coefficients."""
    spec = f.spec
    _check_compat(spec, sys)
    n, J = spec.n, spec.J
    periodic = spec.ext == "periodic"
    h, g = sys.h, sys.g

    a = f.values * 2.0 ** (-n * J / 2.0)
    off = (0,) * n
    details: dict[int, dict[int, np.ndarray]] = {}
    detail_off: dict[int, tuple[int, ...]] = {}

    for j in range(J - 1, -1, -1):
        # Split progressively along each axis; keys are per-axis L/H letters.
        parts: dict[tuple[str, ...], np.ndarray] = {(): a}
        offs: dict[tuple[str, ...], tuple[int, ...]] = {(): off}
        for axis in range(n):
            new_parts: dict[tuple[str, ...], np.ndarray] = {}
            new_offs: dict[tuple[str, ...], tuple[int, ...]] = {}
            for key, arr in parts.items():
                o = offs[key]
                lo, hi, k0 = _stage_analyze_axis(arr, o[axis], axis, h, g, periodic)
                oo = list(o)
                oo[axis] = k0
                new_parts[key + ("L",)] = lo
                new_offs[key + ("L",)] = tuple(oo)
                new_parts[key + ("H",)] = hi
                new_offs[key + ("H",)] = tuple(oo)
            parts, offs = new_parts, new_offs
        low_key = ("L",) * n
        a, off = parts[low_key], offs[low_key]
        bands: dict[int, np.ndarray] = {}
        for key, arr in parts.items():
            if key == low_key:
                continue
            gender = int("".join("1" if c == "H" else "0" for c in key), 2)
            bands[gender] = arr
        details[j] = bands
        detail_off[j] = offs[("H",) * n]  # all genders share the stage offsets

    return WaveletCoefficients(spec=spec, system=sys, scaling=a, scaling_off=off,
                               details=details, detail_off=detail_off)


def synthesize(c: WaveletCoefficients) -> SampledFunction:
    """Inverse transform; exact adjoint of :func:`analyze`."""
    spec, sys = c.spec, c.system
    _check_compat(spec, sys)
    n, J = spec.n, spec.J
    periodic = spec.ext == "periodic"
    h, g = sys.h, sys.g

    a, off = c.scaling, c.scaling_off
    for j in range(J):
        bands = dict(c.details[j])
        band_off = c.detail_off[j]
        parts: dict[tuple[str, ...], tuple[np.ndarray, tuple[int, ...]]] = {}
        parts[("L",) * n] = (a, off)
        for gender, arr in bands.items():
            key = tuple("H" if (gender >> (n - 1 - ax)) & 1 else "L" for ax in range(n))
            parts[key] = (arr, band_off)
        # Combine along the last axis first, then work backwards.
        for axis in range(n - 1, -1, -1):
            new_parts: dict[tuple[str, ...], tuple[np.ndarray, tuple[int, ...]]] = {}
            prefixes = {key[:axis] for key in parts}
            for pre in prefixes:
                lo_arr, lo_off = parts[pre + ("L",)]
                hi_arr, hi_off = parts[pre + ("H",)]
                if not periodic:
                    # Align the untouched leading axes before combining.
                    (lo_arr, hi_arr), common = _align_bands(
                        [(lo_arr, lo_off), (hi_arr, hi_off)])
                    lo_off = hi_off = common
                out, o0 = _stage_synth_axis(lo_arr, lo_off[axis], hi_arr, hi_off[axis],
                                            axis, h, g, periodic)
                oo = list(lo_off)
                oo[axis] = o0
                new_parts[pre] = (out, tuple(oo))
            parts = new_parts
        a, off = parts[()]

    values = np.zeros(spec.shape)
    if periodic:
        values[...] = a
    else:
        # Crop / place the reconstruction into the box.
        src = [slice(max(0, -off[ax]),
                     min(a.shape[ax], spec.samples_per_axis - off[ax]))
               for ax in range(n)]
        dst = [slice(max(0, off[ax]),
                     max(0, off[ax]) + max(0, src[ax].stop - src[ax].start))
               for ax in range(n)]
        if all(s.stop > s.start for s in src):
            values[tuple(dst)] = a[tuple(src)]
    values *= 2.0 ** (n * J / 2.0)
    return SampledFunction(spec, values)


# ----------------------------------------------------------- functionals --

def _norm_factor(j: int, s: float, n: int) -> float:
    """|I|^(-s/n - 1/2) for a level-j cube."""
    return 2.0 ** (j * (s + n / 2.0))


def coeff_norm_binf(c: WaveletCoefficients, s: float) -> float:
    """sup over omega of |I_omega|^(-s/n - 1/2) |c_omega|  (b^s_inf,inf)."""
    if s >= c.system.L_eff:
        warnings.warn(
            f"smoothness s={s} is not below the declared regularity "
            f"L_eff={c.system.L_eff} of Db-{c.system.N}; the coefficient norm "
            "is no longer equivalent to the difference-side norm", stacklevel=2)
    n = c.spec.n
    best = float(np.max(np.abs(c.scaling))) if c.scaling.size else 0.0
    for j, _gender, arr, _off in c.iter_detail_bands():
        if arr.size:
            best = max(best, float(np.max(np.abs(arr))) * _norm_factor(j, s, n))
    return best


@dataclass
class CubeFamilies:
    """Per-level super-level cube families, as boolean arrays over the
    in-box cube grid at each level (shape (2^(K+j),)*n)."""

    spec: GridSpec
    W0: dict[int, np.ndarray]     # details and, at level 0, scaling
    W: dict[int, np.ndarray]      # details only
    V0: np.ndarray                # level-0 scaling exceedances

    def w0_nonempty_levels(self) -> list[int]:
        return [j for j in sorted(self.W0) if bool(np.any(self.W0[j]))]


def _clip_to_box(arr: np.ndarray, off: tuple[int, ...], per_axis: int) -> np.ndarray:
    """Embed a (possibly offset) coefficient-exceedance array into the in-box
    cube grid, dropping out-of-box positions."""
    n = arr.ndim
    out = np.zeros((per_axis,) * n, dtype=arr.dtype)
    src = [slice(max(0, -off[ax]), min(arr.shape[ax], per_axis - off[ax]))
           for ax in range(n)]
    if any(s.stop <= s.start for s in src):
        return out
    dst = [slice(off[ax] + src[ax].start, off[ax] + src[ax].stop) for ax in range(n)]
    out[tuple(dst)] = arr[tuple(src)]
    return out


def superlevel_sets(c: WaveletCoefficients, s: float, eps: float) -> CubeFamilies:
    """Cube families where normalized coefficients exceed eps.

    W0_j: cubes I in D_j with max_{omega: I_omega = I} |c_omega| >
    eps |I|^(s/n + 1/2) over all of Omega (scaling included at level 0);
    W_j excludes the scaling part; V0 is the level-0 scaling exceedance set.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    spec = c.spec
    n = spec.n
    W0: dict[int, np.ndarray] = {}
    W: dict[int, np.ndarray] = {}
    for j in sorted(c.details):
        per_axis = 1 << (spec.K + j)
        thr = eps / _norm_factor(j, s, n)
        exceed = None
        for arr in c.details[j].values():
            e = np.abs(arr) > thr
            exceed = e if exceed is None else (exceed | e)
        mask = _clip_to_box(exceed, c.detail_off[j], per_axis)
        W[j] = mask
        W0[j] = mask.copy()
    v0 = _clip_to_box(np.abs(c.scaling) > eps, c.scaling_off, 1 << spec.K)
    if 0 in W0:
        W0[0] |= v0
    else:
        W0[0] = v0.copy()
    return CubeFamilies(spec=spec, W0=W0, W=W, V0=v0)


def threshold_approx(c: WaveletCoefficients, s: float, eps: float) -> WaveletCoefficients:
    """G_eps(f): keep the coefficients of cubes whose normalized maximum
    exceeds eps, zero the rest.  The residual b^s_inf,inf norm is <= eps by
    construction (the cube test covers every stored position, including
    out-of-box ones in zero mode)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = c.spec.n
    new_details: dict[int, dict[int, np.ndarray]] = {}
    new_scaling = np.where(np.abs(c.scaling) > eps, c.scaling, 0.0)
    for j in sorted(c.details):
        thr = eps / _norm_factor(j, s, n)
        bands = c.details[j]
        keep = np.zeros(next(iter(bands.values())).shape, dtype=bool)
        for arr in bands.values():
            keep |= np.abs(arr) > thr
        if j == 0:
            # Level-0 details and the scaling part come from the same stage,
            # so their index ranges coincide and the cube test pools them.
            keep |= np.abs(c.scaling) > eps
            new_scaling = np.where(keep, c.scaling, 0.0)
        new_details[j] = {g: np.where(keep, arr, 0.0) for g, arr in bands.items()}
    return WaveletCoefficients(spec=c.spec, system=c.system,
                               scaling=new_scaling, scaling_off=c.scaling_off,
                               details=new_details, detail_off=dict(c.detail_off))


def scaling_tail(c: WaveletCoefficients, K0: int,
                 ref: tuple[float, ...] | None = None) -> ScalingTail:
    """Finite-box surrogate of the scaling-coefficient tail: the maximum of
    |<f, phi_k>| over level-0 positions at max-norm distance >= K0 from a
    reference point (default: the box center), in unit-cell units.

    Returns value 0.0 with positions=0 when no position is that far out.
    """
    spec = c.spec
    n = spec.n
    if ref is None:
        ref = (spec.box_side / 2.0,) * n
    axes = []
    for ax in range(n):
        idx = np.arange(c.scaling.shape[ax]) + c.scaling_off[ax]
        axes.append(np.abs(idx + 0.5 - ref[ax]))
    if n == 1:
        dist = axes[0]
    else:
        dist = np.maximum(axes[0][:, None], axes[1][None, :])
    far = dist >= K0
    count = int(np.count_nonzero(far))
    if count == 0:
        return ScalingTail(0.0, 0)
    return ScalingTail(float(np.max(np.abs(c.scaling[far]))), count)


def prescribed_coefficients(spec: GridSpec, sys: WaveletSystem,
                            detail_values: dict[int, dict[int, np.ndarray]],
                            scaling: np.ndarray | None = None) -> WaveletCoefficients:
    """Build a coefficient family from prescribed in-box values (offsets 0).

    Missing levels/genders are zero-filled; used by the corpus generators.
    """
    n = spec.n
    details: dict[int, dict[int, np.ndarray]] = {}
    detail_off: dict[int, tuple[int, ...]] = {}
    genders = range(1, (1 << n))
    for j in range(spec.J):
        per_axis = 1 << (spec.K + j)
        shape = (per_axis,) * n
        bands = {}
        given = detail_values.get(j, {})
        for gender in genders:
            arr = np.zeros(shape)
            if gender in given:
                src = np.asarray(given[gender], dtype=np.float64)
                if src.shape != shape:
                    raise ValueError(
                        f"level {j} gender {gender}: expected shape {shape}, got {src.shape}")
                arr = src.copy()
            bands[gender] = arr
        details[j] = bands
        detail_off[j] = (0,) * n
    per_axis0 = 1 << spec.K
    if scaling is None:
        scaling = np.zeros((per_axis0,) * n)
    else:
        scaling = np.asarray(scaling, dtype=np.float64).copy()
        if scaling.shape != (per_axis0,) * n:
            raise ValueError("scaling shape mismatch")
    return WaveletCoefficients(spec=spec, system=sys, scaling=scaling,
                               scaling_off=(0,) * n, details=details,
                               detail_off=detail_off)
