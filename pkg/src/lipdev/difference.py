"""Symmetric differences, difference moduli, Lipschitz norms and bad sets.

The r-fold symmetric difference is evaluated in closed form,
Delta_h^r f(x) = sum_i (-1)^i C(r, i) f(x + (r/2 - i) h), on grid-representable
steps h; for odd r the step must be an even number of cells so that the
half-offsets land on cell centers.  The difference modulus takes the maximum
over a direction set with |h| = y (exact mode) or over all sampled |h| <= y
(sup mode); in one dimension the direction set is {+1}, since flipping the
sign of h only flips the sign of the difference.

Bad sets live on a RegionMask: per dyadic level j the octave
(2^-j-1, 2^-j] is split into M log-uniform sub-bands, each represented by a
boolean array over the finest grid cells; every sub-band has exact
dy/y-width ln(2)/M, which keeps Carleson integrals exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from lipdev.grid import DyadicCube, GridSpec, SampledFunction, cube_cell_slices

__all__ = [
    "DiffConfig",
    "RegionMask",
    "sym_diff",
    "diff_modulus",
    "diff_field",
    "lip_norm",
    "bad_set",
    "ratio_fields",
    "whitney_gap",
    "tent_coeff_bound",
]


@dataclass(frozen=True)
class DiffConfig:
    """Difference-operator configuration.

    r:      difference order (r > s)
    s:      smoothness exponent
    h_mode: "exact" (|h| = y) or "sup" (|h| <= y)
    D:      directions per half-turn for n = 2 (angles k pi / D)
    M:      log-uniform y samples per dyadic octave
    """

    r: int
    s: float
    h_mode: str = "exact"
    D: int = 8
    M: int = 4

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ValueError(f"order r must be a positive integer, got {self.r}")
        if not (0.0 < self.s < self.r):
            raise ValueError(f"need 0 < s < r, got s={self.s}, r={self.r}")
        if self.h_mode not in ("exact", "sup"):
            raise ValueError(f"h_mode must be 'exact' or 'sup', got {self.h_mode!r}")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.D < 2:
            raise ValueError("D must be >= 2")


@dataclass
class RegionMask:
    """Discretized subset of the upper half-space.

    masks[j] has shape (M,) + grid shape; entry (i, x) is the cell
    x-cell x (2^-j-1 2^(i/M), 2^-j-1 2^((i+1)/M)].  The level count is
    independent of the grid's J (it may exceed it, e.g. for Carleson slabs).
    """

    spec: GridSpec
    M: int
    masks: list[np.ndarray] = field(repr=False)

    def __post_init__(self) -> None:
        for j, m in enumerate(self.masks):
            expected = (self.M,) + self.spec.shape
            if m.shape != expected:
                raise ValueError(f"level {j} mask shape {m.shape} != {expected}")
            if m.dtype != np.bool_:
                self.masks[j] = m.astype(bool)

    @property
    def n_levels(self) -> int:
        return len(self.masks)

    def band_centers(self) -> list[np.ndarray]:
        """Geometric midpoints of the y sub-bands, per level."""
        i = np.arange(self.M)
        return [2.0 ** (-(j + 1) + (i + 0.5) / self.M) for j in range(self.n_levels)]

    def band_edges(self, j: int) -> np.ndarray:
        i = np.arange(self.M + 1)
        return 2.0 ** (-(j + 1) + i / self.M)

    def is_empty(self) -> bool:
        return not any(m.any() for m in self.masks)

    def level_nonempty(self) -> list[bool]:
        return [bool(m.any()) for m in self.masks]

    def union(self, other: "RegionMask") -> "RegionMask":
        if other.M != self.M or other.spec.shape != self.spec.shape:
            raise ValueError("incompatible region masks")
        levels = max(self.n_levels, other.n_levels)
        out = []
        for j in range(levels):
            a = self.masks[j] if j < self.n_levels else None
            b = other.masks[j] if j < other.n_levels else None
            if a is None:
                out.append(b.copy())
            elif b is None:
                out.append(a.copy())
            else:
                out.append(a | b)
        return RegionMask(spec=self.spec, M=self.M, masks=out)

    def subset_violations(self, other: "RegionMask") -> int:
        """Number of marked cells of self not marked in other."""
        total = 0
        for j in range(self.n_levels):
            o = other.masks[j] if j < other.n_levels else None
            if o is None:
                total += int(np.count_nonzero(self.masks[j]))
            else:
                total += int(np.count_nonzero(self.masks[j] & ~o))
        return total

    def cell_count(self) -> int:
        return sum(int(np.count_nonzero(m)) for m in self.masks)

    @classmethod
    def empty(cls, spec: GridSpec, M: int, n_levels: int) -> "RegionMask":
        return cls(spec=spec, M=M,
                   masks=[np.zeros((M,) + spec.shape, dtype=bool)
                          for _ in range(n_levels)])

    def to_rle_json(self) -> dict:
        """Run-length-encoded per-level bitmaps with a small header."""
        levels = []
        for m in self.masks:
            flat = m.ravel()
            # runs of equal values, starting value first
            if flat.size == 0:
                levels.append({"start": 0, "runs": []})
                continue
            change = np.flatnonzero(np.diff(flat.view(np.int8))) + 1
            bounds = np.concatenate(([0], change, [flat.size]))
            runs = np.diff(bounds).tolist()
            levels.append({"start": int(flat[0]), "runs": runs})
        return {"J": self.n_levels, "M": self.M,
                "shape": list(self.spec.shape), "levels": levels}


# ------------------------------------------------------------ differences --

def _shift(values: np.ndarray, spec: GridSpec, d: Sequence[int]) -> np.ndarray:
    """values evaluated at cell + d (integer cell offsets), honoring the
    extension mode: periodic wraps, zero fills with 0."""
    if spec.ext == "periodic":
        return np.roll(values, shift=tuple(-di for di in d),
                       axis=tuple(range(values.ndim)))
    out = np.zeros_like(values)
    src = []
    dst = []
    for ax, di in enumerate(d):
        L = values.shape[ax]
        if abs(di) >= L:
            return out
        if di >= 0:
            src.append(slice(di, L))
            dst.append(slice(0, L - di))
        else:
            src.append(slice(0, L + di))
            dst.append(slice(-di, L))
    out[tuple(dst)] = values[tuple(src)]
    return out


def _sym_diff_field(values: np.ndarray, spec: GridSpec, r: int,
                    m: Sequence[int]) -> np.ndarray:
    """Delta_h^r f on the whole grid for integer step vector m (cells).
    For odd r every component of m must be even."""
    if r % 2 == 1 and any(mi % 2 for mi in m):
        raise ValueError(f"odd order {r} needs even cell steps, got {m}")
    out = np.zeros_like(values)
    for i in range(r + 1):
        # offset (r/2 - i) * m, always an integer vector here
        d = [((r - 2 * i) * mi) // 2 for mi in m]
        out += ((-1) ** i) * comb(r, i) * _shift(values, spec, d)
    return out


def _grid_steps(spec: GridSpec, y: float, r: int) -> int:
    """Nearest admissible integer cell count for step length y."""
    m = int(round(y * 2**spec.J))
    if r % 2 == 1:
        m = max(2, 2 * int(round(y * 2**spec.J / 2.0)))
    return max(m, 1)


def _directions(spec: GridSpec, cfg: DiffConfig, m: int) -> list[tuple[int, ...]]:
    """Integer step vectors of length ~ m cells along the sampled directions."""
    if spec.n == 1:
        return [(m,)]
    even = cfg.r % 2 == 1

    def _round(v: float) -> int:
        if even:
            return 2 * int(round(v / 2.0))
        return int(round(v))

    seen = set()
    out = []
    for d in range(cfg.D):
        th = d * np.pi / cfg.D
        step = (_round(m * np.cos(th)), _round(m * np.sin(th)))
        if step == (0, 0):
            step = (2 if even else 1, 0)
        if step not in seen:
            seen.add(step)
            out.append(step)
    return out


def sym_diff(f: SampledFunction, x, h, r: int) -> float:
    """Pointwise r-fold symmetric difference at grid point x with step h.

    x: cell-center coordinate(s); h: grid-representable step vector.
    """
    spec = f.spec
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    hs = np.atleast_1d(np.asarray(h, dtype=float))
    idx = []
    for ax in range(spec.n):
        i = xs[ax] * 2**spec.J - 0.5
        if abs(i - round(i)) > 1e-9:
            raise ValueError(f"x[{ax}]={xs[ax]} is not a cell center")
        idx.append(int(round(i)))
    m = []
    for ax in range(spec.n):
        mi = hs[ax] * 2**spec.J
        if abs(mi - round(mi)) > 1e-9:
            raise ValueError(f"h[{ax}]={hs[ax]} is not grid-representable")
        m.append(int(round(mi)))
    if r % 2 == 1 and any(mi % 2 for mi in m):
        raise ValueError(f"odd order {r} needs h an even number of cells, got {m}")
    total = 0.0
    for i in range(r + 1):
        d = [((r - 2 * i) * mi) // 2 for mi in m]
        pos = []
        oob = False
        for ax in range(spec.n):
            p = idx[ax] + d[ax]
            if spec.ext == "periodic":
                p %= spec.samples_per_axis
            elif not (0 <= p < spec.samples_per_axis):
                oob = True
            pos.append(p)
        if oob:
            continue  # zero extension: the sample is 0
        total += ((-1) ** i) * comb(r, i) * float(f.values[tuple(pos)])
    return total


def _band_max_field(f: SampledFunction, cfg: DiffConfig, m: int) -> np.ndarray:
    """max over the step set for nominal radius m cells of |Delta_h^r f|."""
    spec = f.spec
    if cfg.h_mode == "exact":
        radii = [m]
    else:
        step = 2 if cfg.r % 2 == 1 else 1
        radii = list(range(step, m + 1, step)) or [m]
        if spec.n == 2 and len(radii) > 4 * cfg.M:
            # sup mode in 2-d samples radii log-uniformly (monotone
            # under-approximation, like the direction sampling)
            pick = np.unique(np.round(
                np.geomspace(radii[0], radii[-1], 4 * cfg.M)).astype(int))
            radii = [int(v) for v in pick]
    out = np.zeros(spec.shape)
    for mm in radii:
        for step_vec in _directions(spec, cfg, mm):
            np.maximum(out, np.abs(_sym_diff_field(f.values, spec, cfg.r, step_vec)),
                       out=out)
    return out


def diff_field(f: SampledFunction, cfg: DiffConfig, j: int
               ) -> tuple[np.ndarray, np.ndarray]:
    """Difference modulus on level j's sub-bands.

    Returns (field, y) where field has shape (M,) + grid shape and y holds
    the grid-representable step lengths actually used per sub-band.
    """
    spec = f.spec
    vals = np.empty((cfg.M,) + spec.shape)
    ys = np.empty(cfg.M)
    for i in range(cfg.M):
        y_nom = 2.0 ** (-(j + 1) + (i + 0.5) / cfg.M)
        m = _grid_steps(spec, y_nom, cfg.r)
        ys[i] = m * spec.spacing
        vals[i] = _band_max_field(f, cfg, m)
    return vals, ys


def diff_modulus(f: SampledFunction, x, y: float, cfg: DiffConfig) -> float:
    """Difference modulus at a single point: max over the sampled step set
    with |h| = y (exact mode) or |h| <= y (sup mode)."""
    spec = f.spec
    if not (0.0 < y <= spec.box_side):
        raise ValueError(f"need 0 < y <= box side, got {y}")
    m = _grid_steps(spec, y, cfg.r)
    fld = _band_max_field(f, cfg, m)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    idx = tuple(int(round(xs[ax] * 2**spec.J - 0.5)) for ax in range(spec.n))
    return float(fld[idx])


def lip_norm(f: SampledFunction, cfg: DiffConfig) -> tuple[float, float]:
    """(sup norm, Lipschitz seminorm): the seminorm is the maximum over the
    sampled (x, y) with y in (0, 1] of the difference modulus over y^s."""
    semi = 0.0
    for j in range(f.spec.J):
        fld, ys = diff_field(f, cfg, j)
        for i in range(cfg.M):
            semi = max(semi, float(np.max(fld[i])) / ys[i] ** cfg.s)
    return f.sup_norm(), semi


def ratio_fields(f: SampledFunction, cfg: DiffConfig) -> list[np.ndarray]:
    """Per level j: array (M,) + grid shape of Delta_r f(x, y) / y^s.
    Thresholding these at eps gives the bad-set masks."""
    out = []
    for j in range(f.spec.J):
        fld, ys = diff_field(f, cfg, j)
        out.append(fld / ys[:, None] ** cfg.s if f.spec.n == 1
                   else fld / ys[:, None, None] ** cfg.s)
    return out


def bad_set(f: SampledFunction, cfg: DiffConfig, eps: float) -> RegionMask:
    """S_r(s, f, eps): cells where the difference modulus exceeds eps y^s."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    masks = []
    for j in range(f.spec.J):
        fld, ys = diff_field(f, cfg, j)
        thr = (eps * ys ** cfg.s)
        shape = (cfg.M,) + (1,) * f.spec.n
        masks.append(fld > thr.reshape(shape))
    return RegionMask(spec=f.spec, M=cfg.M, masks=masks)


def mask_from_ratios(spec: GridSpec, M: int, ratios: list[np.ndarray],
                     eps: float) -> RegionMask:
    """Threshold precomputed ratio fields (cheap per-eps path)."""
    return RegionMask(spec=spec, M=M, masks=[r > eps for r in ratios])


# -------------------------------------------------------- Whitney & tents --

def _window_cells(spec: GridSpec, cube: DyadicCube, factor: float
                  ) -> tuple[np.ndarray, ...]:
    """Indices of grid cells whose centers lie in factor * cube (same center,
    side scaled), clipped to the box."""
    side = cube.side
    out = []
    for k in cube.index:
        c = (k + 0.5) * side
        half = factor * side / 2.0
        lo = int(np.ceil((c - half) * 2**spec.J - 0.5))
        hi = int(np.floor((c + half) * 2**spec.J - 0.5))
        lo = max(lo, 0)
        hi = min(hi, spec.samples_per_axis - 1)
        if hi < lo:
            raise ValueError("window does not contain any grid cell")
        out.append(np.arange(lo, hi + 1))
    return tuple(out)


def _monomial_matrix(coords: list[np.ndarray], degree: int) -> np.ndarray:
    """Vandermonde-type matrix of all monomials of total degree <= degree,
    on coordinates rescaled to [-1, 1] for conditioning."""
    n = len(coords)
    scaled = []
    for c in coords:
        lo, hi = float(np.min(c)), float(np.max(c))
        mid, half = (lo + hi) / 2.0, max((hi - lo) / 2.0, 1e-30)
        scaled.append((c - mid) / half)
    cols = []
    if n == 1:
        for a in range(degree + 1):
            cols.append(scaled[0] ** a)
    else:
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                cols.append(scaled[0] ** a * scaled[1] ** b)
    return np.column_stack(cols)


def _discrete_minimax(points_vals: np.ndarray, vander: np.ndarray) -> float:
    """inf over polynomial coefficients of the sup norm of (vals - V c),
    solved exactly as a Chebyshev linear program."""
    npts, ncoef = vander.shape
    if npts < ncoef:
        raise ValueError(
            f"degenerate window: {npts} grid points for {ncoef} polynomial "
            "coefficients")
    # variables: (c_0..c_k, t); minimize t subject to |vals - V c| <= t
    A_ub = np.block([[vander, -np.ones((npts, 1))],
                     [-vander, -np.ones((npts, 1))]])
    b_ub = np.concatenate([points_vals, -points_vals])
    cost = np.zeros(ncoef + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub,
                  bounds=[(None, None)] * ncoef + [(0, None)],
                  method="highs")
    if not res.success:
        raise RuntimeError(f"minimax LP failed: {res.message}")
    return float(res.x[-1])


def _sup_over_window(f: SampledFunction, cfg: DiffConfig, cube: DyadicCube,
                     factor: float, y_lo: float, y_hi: float) -> float:
    """sup over x in factor*cube (clipped) and sampled y in [y_lo, y_hi] of
    the difference modulus."""
    spec = f.spec
    axes = _window_cells(spec, cube, factor)
    n_samples = max(2, int(np.ceil(cfg.M * np.log2(max(y_hi / y_lo, 1.0 + 1e-12)))) + 1)
    ys = np.geomspace(y_lo, y_hi, n_samples)
    best = 0.0
    seen = set()
    for y in ys:
        m = _grid_steps(spec, y, cfg.r)
        if m in seen:
            continue
        seen.add(m)
        fld = _band_max_field(f, cfg, m)
        window = fld[np.ix_(*axes)] if spec.n == 2 else fld[axes[0]]
        best = max(best, float(np.max(window)))
    return best


def whitney_gap(f: SampledFunction, cube: DyadicCube, cfg: DiffConfig,
                A0: float, A: float | None = None) -> tuple[float, float]:
    """Local polynomial-approximation gap.

    lhs: discrete minimax distance of f to polynomials of total degree
    <= r - 1 on the grid points of A0 * cube.
    rhs: sup of the difference modulus over x in A * cube and
    y in [l(I)/A, l(I)/2]  (A defaults to 2 A0).
    The caller compares lhs <= C rhs empirically.
    """
    if A0 <= 2:
        raise ValueError("A0 must exceed 2")
    if A is None:
        A = 2.0 * A0
    spec = f.spec
    axes = _window_cells(spec, cube, A0)
    coords = [(a + 0.5) * spec.spacing for a in axes]
    if spec.n == 1:
        vals = f.values[axes[0]]
        pts = [coords[0]]
    else:
        g0, g1 = np.meshgrid(coords[0], coords[1], indexing="ij")
        vals = f.values[np.ix_(*axes)].ravel()
        pts = [g0.ravel(), g1.ravel()]
    vander = _monomial_matrix(pts, cfg.r - 1)
    lhs = _discrete_minimax(np.asarray(vals).ravel(), vander)
    rhs = _sup_over_window(f, cfg, cube, A, cube.side / A, cube.side / 2.0)
    return lhs, rhs


def tent_coeff_bound(c, f: SampledFunction, cube: DyadicCube, cfg: DiffConfig,
                     A0: float) -> tuple[float, float]:
    """Normalized coefficient size at a cube vs the difference modulus over
    the enlarged tent T_A0(I) = A0 I x [l(I)/A0, l(I)/2]."""
    spec = f.spec
    j = cube.level
    if not (0 <= j < spec.J):
        raise ValueError(f"cube level {j} outside detail range [0, {spec.J})")
    off = c.detail_off[j]
    best = 0.0
    for arr in c.details[j].values():
        pos = tuple(cube.index[ax] - off[ax] for ax in range(spec.n))
        if all(0 <= pos[ax] < arr.shape[ax] for ax in range(spec.n)):
            best = max(best, abs(float(arr[pos])))
    lhs = best * cube.volume ** (-0.5 - cfg.s / spec.n)
    y_lo, y_hi = cube.side / A0, cube.side / 2.0
    m_width = _sup_over_window(f, cfg, cube, A0, y_lo, y_hi)
    # normalize by the smallest y^s in the window: sup of Delta/y^s >= this
    rhs = 0.0
    axes = _window_cells(spec, cube, A0)
    ys = np.geomspace(y_lo, y_hi, max(2, cfg.M + 1))
    for y in ys:
        m = _grid_steps(spec, y, cfg.r)
        fld = _band_max_field(f, cfg, m)
        window = fld[np.ix_(*axes)] if spec.n == 2 else fld[axes[0]]
        yy = m * spec.spacing
        rhs = max(rhs, float(np.max(window)) / yy ** cfg.s)
    _ = m_width
    return lhs, rhs
