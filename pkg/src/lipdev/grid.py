"""Dyadic grids, cubes and tents.

Everything downstream works on a dyadic grid over the box [0, 2^K)^n with
samples spaced 2^-J per axis and located at cell centers.  Cell-center
sampling keeps cube membership unambiguous: a sample belongs to exactly one
dyadic cube at every level, so indicator sums never double-count boundaries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "SampledFunction",
    "DyadicCube",
    "Tent",
    "sample",
    "cubes_at_level",
    "tent_of",
]

_EXT_MODES = ("zero", "periodic")


@dataclass(frozen=True)
class GridSpec:
    """Dyadic grid over the box [0, 2^K)^n with spacing 2^-J.

    n:   dimension (1 or 2)
    J:   finest dyadic level; samples are spaced 2^-J per axis
    K:   box exponent; the domain is [0, 2^K)^n
    ext: how evaluations outside the box behave ("zero" or "periodic")
    """

    n: int
    J: int
    K: int = 0
    ext: str = "periodic"

    def __post_init__(self) -> None:
        if self.n not in (1, 2):
            raise ValueError(f"dimension n must be 1 or 2, got {self.n}")
        if self.J < 1:
            raise ValueError(f"finest level J must be >= 1, got {self.J}")
        if self.K < 0:
            raise ValueError(f"box exponent K must be >= 0, got {self.K}")
        if self.ext not in _EXT_MODES:
            raise ValueError(f"extension mode must be one of {_EXT_MODES}, got {self.ext!r}")

    @property
    def samples_per_axis(self) -> int:
        return 1 << (self.K + self.J)

    @property
    def spacing(self) -> float:
        return 2.0 ** (-self.J)

    @property
    def box_side(self) -> float:
        return float(1 << self.K)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.samples_per_axis,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.n

    def axis_centers(self) -> np.ndarray:
        m = self.samples_per_axis
        return (np.arange(m) + 0.5) * self.spacing

    def to_json(self) -> dict:
        return {"n": self.n, "J": self.J, "K": self.K, "ext": self.ext}

    @classmethod
    def from_json(cls, obj: dict) -> "GridSpec":
        return cls(n=int(obj["n"]), J=int(obj["J"]), K=int(obj.get("K", 0)),
                   ext=str(obj.get("ext", "periodic")))


@dataclass(frozen=True)
class SampledFunction:
    """Real-valued function sampled at the cell centers of a dyadic grid."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.spec.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid shape {self.spec.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            coord = tuple((float(i) + 0.5) * self.spec.spacing for i in bad)
            raise ValueError(f"non-finite sample at grid coordinate {coord}")
        object.__setattr__(self, "values", values)

    def scaled(self, factor: float) -> "SampledFunction":
        return SampledFunction(self.spec, self.values * factor)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm_sq(self) -> float:
        """Cell-volume-weighted squared grid l2 norm."""
        return float(np.sum(self.values**2) * self.spec.cell_volume)


@dataclass(frozen=True)
class DyadicCube:
    """Dyadic cube 2^-j * ([0,1)^n + k); side length 2^-j.

    Negative levels (side > 1) are admitted only for the large-cube suprema
    of the type-space quasi-norms; tents and coefficient indexing use j >= 0.
    """

    level: int
    index: tuple[int, ...]

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def n(self) -> int:
        return len(self.index)

    @property
    def volume(self) -> float:
        return self.side**self.n

    def lower_corner(self) -> tuple[float, ...]:
        return tuple(k * self.side for k in self.index)

    def contains_point(self, x: Sequence[float]) -> bool:
        lo = self.lower_corner()
        return all(lo[i] <= x[i] < lo[i] + self.side for i in range(self.n))


@dataclass(frozen=True)
class Tent:
    """Carleson tent T(I) = I x (l(I)/2, l(I)] over a dyadic cube."""

    base: DyadicCube

    @property
    def y_lo(self) -> float:
        return self.base.side / 2.0

    @property
    def y_hi(self) -> float:
        return self.base.side


def sample(expr: Callable, spec: GridSpec) -> SampledFunction:
    """Sample a pointwise function at every cell center of the grid.

    ``expr`` receives one float per axis (x for n=1; x, y for n=2) and is
    evaluated vectorized over numpy arrays.
    """
    centers = spec.axis_centers()
    if spec.n == 1:
        values = np.asarray(expr(centers), dtype=np.float64)
        values = np.broadcast_to(values, spec.shape).copy()
    else:
        gx, gy = np.meshgrid(centers, centers, indexing="ij")
        values = np.asarray(expr(gx, gy), dtype=np.float64)
        values = np.broadcast_to(values, spec.shape).copy()
    return SampledFunction(spec, values)


def cubes_at_level(spec: GridSpec, j: int) -> list[DyadicCube]:
    """All dyadic cubes of level j tiling the box [0, 2^K)^n.

    Requires -K <= j <= J; there are 2^((K+j)n) of them.
    """
    if not (-spec.K <= j <= spec.J):
        raise ValueError(f"level {j} outside admissible range [{-spec.K}, {spec.J}]")
    per_axis = 1 << (spec.K + j)
    return [DyadicCube(j, idx)
            for idx in itertools.product(range(per_axis), repeat=spec.n)]


def tent_of(cube: DyadicCube) -> Tent:
    return Tent(cube)


def level_cube_count(spec: GridSpec, j: int) -> int:
    if not (-spec.K <= j <= spec.J):
        raise ValueError(f"level {j} outside admissible range [{-spec.K}, {spec.J}]")
    return (1 << (spec.K + j)) ** spec.n


def cube_cell_slices(spec: GridSpec, cube: DyadicCube) -> tuple[slice, ...]:
    """Slices selecting the finest-grid cells covered by an in-box cube."""
    if cube.level > spec.J:
        raise ValueError("cube finer than the grid")
    cells = 1 << (spec.J - cube.level)
    out = []
    for k in cube.index:
        lo = k * cells
        if lo < 0 or lo + cells > spec.samples_per_axis:
            raise ValueError(f"cube {cube} does not lie inside the box")
        out.append(slice(lo, lo + cells))
    return tuple(out)
