"""Level stacks and sequence-lattice quasi-norms.

A LevelStack holds, per dyadic level j, a nonnegative function f_j sampled on
the finest grid cells.  Two sources produce stacks:

* bad-set region masks: f_j(x) = (marked sub-bands over x) * ln(2)/M, the
  exact y-slice of dy/y through the bad set over x;
* cube families: f_j = weight * indicator(union of the level-j cubes).

The quasi-norms evaluated on stacks are discretizations of the classical
smoothness-space functionals applied to the stack of slices:

    besov(p, q):       ( sum_j m_j^(q/p) )^(1/q),           m_j = integral f_j
    triebel(p, q):     ( integral G^(p/q) )^(1/p),          G = sum_j f_j
    f_inf:             Carleson constant sup_Q (1/|Q|) integral_Q S_(j_Q)
    besov_type(p,q,t): sup_Q |Q|^-t ( sum_(j>=j_Q) (integral_Q f_j)^(q/p) )^(1/q)
    tl_type(p,q,t):    sup_Q |Q|^-t ( integral_Q S_(j_Q)^(p/q) )^(1/p)

with S_(j0) = sum_(j>=j0) f_j and j_Q = max(level(Q), 0).  Q runs over the
dyadic cubes of side between one grid cell and the full box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from lipdev.grid import DyadicCube, GridSpec, cube_cell_slices
from lipdev.difference import RegionMask

__all__ = [
    "LatticeSpec",
    "LevelStack",
    "stack_from_badset",
    "stack_from_cubes",
    "stack_from_level_masks",
    "x_norm",
    "carleson_M",
    "nonempty_levels",
    "convexify",
]

_TAGS = ("besov", "triebel", "f_inf", "besov_type", "tl_type")


@dataclass(frozen=True)
class LatticeSpec:
    """Which lattice quasi-norm to evaluate, with its exponents.

    p, q in (0, inf]; tau in [0, 1/p) for the type-space tags.
    Use math.inf for an infinite exponent.
    """

    tag: str
    p: float = math.inf
    q: float = math.inf
    tau: float = 0.0

    def __post_init__(self) -> None:
        if self.tag not in _TAGS:
            raise ValueError(f"tag must be one of {_TAGS}, got {self.tag!r}")
        if not (self.p > 0 and self.q > 0):
            raise ValueError(f"exponents must be positive, got p={self.p}, q={self.q}")
        if self.tag in ("besov_type", "tl_type"):
            if math.isinf(self.p):
                raise ValueError("type-space tags need finite p")
            if not (0.0 <= self.tau < 1.0 / self.p):
                raise ValueError(f"need 0 <= tau < 1/p, got tau={self.tau}, p={self.p}")


@dataclass
class LevelStack:
    """Nonnegative level functions f_j on the finest grid cells, j = 0..J'-1.

    The number of levels is independent of the grid's J (levels beyond J are
    constant on grid cells, which is all the functionals here need).
    """

    spec: GridSpec
    levels: list[np.ndarray] = field(repr=False)

    def __post_init__(self) -> None:
        for j, a in enumerate(self.levels):
            if a.shape != self.spec.shape:
                raise ValueError(f"level {j} shape {a.shape} != grid {self.spec.shape}")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def measures(self) -> np.ndarray:
        """m_j = integral of f_j over the box."""
        cellvol = self.spec.cell_volume
        return np.array([float(a.sum()) * cellvol for a in self.levels])

    def sum_field(self, j0: int = 0) -> np.ndarray:
        """S_(j0) = sum of f_j over j >= j0."""
        if j0 >= self.n_levels:
            return np.zeros(self.spec.shape)
        out = np.zeros(self.spec.shape)
        for a in self.levels[j0:]:
            out += a
        return out

    def suffix_sums(self) -> list[np.ndarray]:
        """[S_0, S_1, ..., S_(J'-1)] computed in one reverse sweep."""
        out: list[np.ndarray] = [None] * self.n_levels  # type: ignore[list-item]
        acc = np.zeros(self.spec.shape)
        for j in range(self.n_levels - 1, -1, -1):
            acc = acc + self.levels[j]
            out[j] = acc
        return out

    def scaled(self, factor: float) -> "LevelStack":
        return LevelStack(self.spec, [a * factor for a in self.levels])


def stack_from_badset(mask: RegionMask) -> LevelStack:
    """f_j(x) = ln(2)/M per marked sub-band over x: the exact dy/y measure of
    the bad-set slice through (x, level j)."""
    w = math.log(2.0) / mask.M
    return LevelStack(mask.spec,
                      [m.sum(axis=0).astype(float) * w for m in mask.masks])


def stack_from_level_masks(spec: GridSpec, level_masks: Sequence[np.ndarray],
                           weight: float = 1.0) -> LevelStack:
    """Indicator stack from per-level boolean cube arrays (shape
    (2^(K+j),)*n at level j), upsampled to the finest cells."""
    out = []
    for j, m in enumerate(level_masks):
        block = 1 << (spec.J - j)
        a = m.astype(float) * weight
        for ax in range(spec.n):
            a = np.repeat(a, block, axis=ax)
        if a.shape != spec.shape:
            raise ValueError(f"level {j} mask incompatible with grid: {m.shape}")
        out.append(a)
    return LevelStack(spec, out)


def stack_from_cubes(spec: GridSpec, cube_levels: Sequence[Sequence[DyadicCube]],
                     weight: float = 1.0) -> LevelStack:
    """Indicator stack of a cube family: level j is weight on the union of
    the level-j cubes (cubes must be in-box, level between 0 and J)."""
    out = []
    for j, cubes in enumerate(cube_levels):
        a = np.zeros(spec.shape)
        for c in cubes:
            if c.level != j:
                raise ValueError(f"cube of level {c.level} in slot {j}")
            a[cube_cell_slices(spec, c)] = weight
        out.append(a)
    return LevelStack(spec, out)


# -------------------------------------------------------------- functionals --

def _block_sums(a: np.ndarray, block: int) -> np.ndarray:
    """Sums of a over aligned blocks of side `block` cells."""
    n = a.ndim
    if n == 1:
        return a.reshape(-1, block).sum(axis=1)
    return a.reshape(a.shape[0] // block, block,
                     a.shape[1] // block, block).sum(axis=(1, 3))


def _powsum(a: np.ndarray, e: float) -> np.ndarray:
    return a if e == 1.0 else np.power(a, e)


def carleson_M(stack: LevelStack) -> float:
    """sup over dyadic cubes Q (side <= box, >= one cell) and their level
    j_Q of (1/|Q|) integral_Q sum_(j >= j_Q) f_j; levels j_Q beyond the grid's
    J reduce to a pointwise suffix maximum."""
    spec = stack.spec
    cellvol = spec.cell_volume
    suffix = stack.suffix_sums()
    best = 0.0
    for j0 in range(stack.n_levels):
        S = suffix[j0]
        if j0 <= spec.J:
            lvl = max(j0, -spec.K)
            block = 1 << (spec.J - lvl)
            vol = (block * spec.spacing) ** spec.n
            sums = _block_sums(S, block) * cellvol
            best = max(best, float(sums.max()) / vol)
        else:
            # cubes smaller than a cell: the mean equals the cell value
            best = max(best, float(S.max()))
    return best


def nonempty_levels(stack: LevelStack) -> int:
    return sum(1 for a in stack.levels if a.any())


def _besov(stack: LevelStack, p: float, q: float) -> float:
    m = stack.measures()
    if math.isinf(p):
        # per-level sup of the slice height instead of its mass
        m = np.array([float(a.max()) for a in stack.levels])
        a = m
    else:
        a = _powsum(m, 1.0 / p)
    if math.isinf(q):
        return float(a.max()) if a.size else 0.0
    return float(np.sum(a**q) ** (1.0 / q))


def _triebel(stack: LevelStack, p: float, q: float) -> float:
    cellvol = stack.spec.cell_volume
    if math.isinf(q):
        G = np.zeros(stack.spec.shape)
        for a in stack.levels:
            np.maximum(G, a, out=G)
    else:
        G = stack.sum_field(0)
    if math.isinf(p):
        base = float(G.max())
        return base if math.isinf(q) else base ** (1.0 / q)
    if math.isinf(q):
        return float((np.sum(G**p) * cellvol) ** (1.0 / p))
    return float((np.sum(_powsum(G, p / q)) * cellvol) ** (1.0 / p))


def _type_cubes(spec: GridSpec) -> list[tuple[int, int]]:
    """(cube level, block size in cells) for all admissible dyadic cubes."""
    return [(lvl, 1 << (spec.J - lvl)) for lvl in range(-spec.K, spec.J + 1)]


def _besov_type(stack: LevelStack, p: float, q: float, tau: float) -> float:
    spec = stack.spec
    cellvol = spec.cell_volume
    best = 0.0
    for lvl, block in _type_cubes(spec):
        j_q = max(lvl, 0)
        vol = (block * spec.spacing) ** spec.n
        # per-cube stack of (integral_Q f_j)^(q/p), summed over j >= j_q
        acc = None
        for j in range(j_q, stack.n_levels):
            ints = _block_sums(stack.levels[j], block) * cellvol
            term = _powsum(ints, q / p)
            acc = term if acc is None else acc + term
        if acc is None:
            continue
        val = float(np.max(acc)) ** (1.0 / q) * vol ** (-tau)
        best = max(best, val)
    return best


def _tl_type(stack: LevelStack, p: float, q: float, tau: float) -> float:
    spec = stack.spec
    cellvol = spec.cell_volume
    suffix = stack.suffix_sums()
    best = 0.0
    for lvl, block in _type_cubes(spec):
        j_q = max(lvl, 0)
        vol = (block * spec.spacing) ** spec.n
        if j_q >= stack.n_levels:
            continue
        integ = _block_sums(_powsum(suffix[j_q], p / q), block) * cellvol
        val = float(np.max(integ)) ** (1.0 / p) * vol ** (-tau)
        best = max(best, val)
    return best


def x_norm(stack: LevelStack, lat: LatticeSpec) -> float:
    """Evaluate the lattice quasi-norm of a level stack."""
    if lat.tag == "besov":
        return _besov(stack, lat.p, lat.q)
    if lat.tag == "triebel":
        return _triebel(stack, lat.p, lat.q)
    if lat.tag == "f_inf":
        return carleson_M(stack)
    if lat.tag == "besov_type":
        return _besov_type(stack, lat.p, lat.q, lat.tau)
    return _tl_type(stack, lat.p, lat.q, lat.tau)


def convexify(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Lower convex envelope of the points (xs must be increasing); returns
    the envelope's values at xs (useful for cleaning noisy mass curves)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape:
        raise ValueError("xs and ys must be equal-length 1-d arrays")
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies above the chord i0 -> i
            lhs = (ys[i1] - ys[i0]) * (xs[i] - xs[i0])
            rhs = (ys[i] - ys[i0]) * (xs[i1] - xs[i0])
            if lhs >= rhs:
                hull.pop()
            else:
                break
        hull.append(i)
    out = np.empty_like(ys)
    for a, b in zip(hull[:-1], hull[1:]):
        t = (xs[a + 1:b + 1] - xs[a]) / (xs[b] - xs[a])
        out[a + 1:b + 1] = ys[a] + t * (ys[b] - ys[a])
    out[hull[0]] = ys[hull[0]]
    return out
