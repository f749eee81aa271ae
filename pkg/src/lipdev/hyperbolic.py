"""Poincare upper-half-space geometry.

Distance, ball/box bounds, the invariant measure d(mu) = dx dy / y on region
masks, hyperbolic dilation of masks, and a numeric geodesic-length check.

The distance is computed as arccosh(1 + |p-q|^2 / (2 p_y q_y)) in the
cancellation-free form log1p(v + sqrt(v (2 + v))); the equivalent
2 ln((|p-q| + |p-q~|) / (2 sqrt(p_y q_y))) form is exposed separately as a
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

from lipdev.difference import RegionMask

__all__ = [
    "HalfSpacePoint",
    "Box",
    "rho",
    "rho_ln",
    "ball_box_bounds",
    "mu_measure",
    "hyper_neighborhood",
    "geodesic_length",
]


@dataclass(frozen=True)
class HalfSpacePoint:
    """Point (x, y) of the upper half-space R^n x (0, inf)."""

    x: tuple[float, ...]
    y: float

    def __post_init__(self) -> None:
        if not self.y > 0:
            raise ValueError(f"height must be strictly positive, got {self.y}")


def _as_xy(p) -> tuple[np.ndarray, np.ndarray]:
    """Accept HalfSpacePoint or an (x, y) pair of arrays.  The horizontal
    part always carries its coordinates on the last axis (shape (..., n))."""
    if isinstance(p, HalfSpacePoint):
        return np.asarray(p.x, dtype=float), np.asarray(p.y, dtype=float)
    x, y = p
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    return x, np.asarray(y, dtype=float)


def rho(p, q):
    """Hyperbolic distance arccosh(1 + |p-q|^2 / (2 p_y q_y))."""
    px, py = _as_xy(p)
    qx, qy = _as_xy(q)
    dx2 = np.sum((px - qx) ** 2, axis=-1)
    v = (dx2 + (py - qy) ** 2) / (2.0 * py * qy)
    out = np.log1p(v + np.sqrt(v * (2.0 + v)))
    return float(out) if np.asarray(out).ndim == 0 else out


def rho_ln(p, q):
    """Equivalent logarithmic form 2 ln((|p-q| + |p-q~|)/(2 sqrt(p_y q_y)))
    with q~ the reflection of q through the boundary."""
    px, py = _as_xy(p)
    qx, qy = _as_xy(q)
    dx2 = np.sum((px - qx) ** 2, axis=-1)
    d = np.sqrt(dx2 + (py - qy) ** 2)
    d_ref = np.sqrt(dx2 + (py + qy) ** 2)
    out = 2.0 * np.log((d + d_ref) / (2.0 * np.sqrt(py * qy)))
    return float(out) if np.asarray(out).ndim == 0 else out


@dataclass(frozen=True)
class Box:
    """Half-space box B(center, radius) x [y_lo, y_hi] (Euclidean ball base)."""

    center: tuple[float, ...]
    radius: float
    y_lo: float
    y_hi: float

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x[None]
        dist = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        y = np.asarray(y, dtype=float)
        return (dist <= self.radius) & (self.y_lo <= y) & (y <= self.y_hi)


def ball_box_bounds(z: HalfSpacePoint, t: float) -> tuple[Box, Box]:
    """Euclidean boxes sandwiching the hyperbolic ball B_rho(z, t):
    inner box T(z, t/4) inside the ball, ball inside outer box T(z, 2t);
    valid for 0 < t <= 1/4."""
    if not (0.0 < t <= 0.25):
        raise ValueError(f"t must lie in (0, 1/4], got {t}")
    inner = Box(center=z.x, radius=(t / 4.0) * z.y,
                y_lo=(1.0 - t / 4.0) * z.y, y_hi=(1.0 + t / 4.0) * z.y)
    outer = Box(center=z.x, radius=2.0 * t * z.y,
                y_lo=(1.0 - 2.0 * t) * z.y, y_hi=(1.0 + 2.0 * t) * z.y)
    return inner, outer


def mu_measure(m: RegionMask) -> float:
    """mu(m) with d(mu) = dx dy / y: per marked cell, exact x-volume times
    the log-width of its y sub-band."""
    cellvol = m.spec.cell_volume
    logw = np.log(2.0) / m.M
    total = 0.0
    for mask in m.masks:
        total += float(np.count_nonzero(mask)) * cellvol * logw
    return total


def _dilate_1d(src: np.ndarray, r_cells: float, wrap: bool) -> np.ndarray:
    """Mark cells at integer offset |d| < r_cells from a marked cell."""
    w = int(np.ceil(r_cells)) - 1
    if w < 0:
        return np.zeros_like(src)
    if w == 0:
        return src.copy()
    mode = "wrap" if wrap else "constant"
    return maximum_filter1d(src.astype(np.uint8), size=2 * w + 1,
                            mode=mode, cval=0).astype(bool)


def _dilate_2d(src: np.ndarray, r_cells: float, wrap: bool) -> np.ndarray:
    """Exact Euclidean-disk dilation: offsets (d0, d1) with
    d0^2 + d1^2 < r_cells^2."""
    w = int(np.ceil(r_cells)) - 1
    if w < 0:
        return np.zeros_like(src)
    out = np.zeros_like(src)
    mode = "wrap" if wrap else "constant"
    u = src.astype(np.uint8)
    for d0 in range(-w, w + 1):
        rem = r_cells * r_cells - d0 * d0
        if rem <= 0:
            continue
        wx = int(np.ceil(np.sqrt(rem))) - 1
        if wrap:
            row = np.roll(u, d0, axis=0)
        else:
            row = np.zeros_like(u)
            if d0 >= 0:
                row[d0:] = u[:u.shape[0] - d0] if d0 else u
            else:
                row[:d0] = u[-d0:]
        if wx > 0:
            row = maximum_filter1d(row, size=2 * wx + 1, axis=1, mode=mode, cval=0)
        out |= row.astype(bool)
    return out


def hyper_neighborhood(m: RegionMask, R: float) -> RegionMask:
    """Cellwise hyperbolic dilation: mark every cell whose center lies within
    distance < R of some marked cell center.

    For a source band at height y_s and a target band at height y_t the
    condition on the horizontal offset is
    |u - x|^2 < 2 y_s y_t (cosh R - 1) - (y_s - y_t)^2,
    a fixed radius per band pair, so the dilation is a sliding maximum
    (an exact disk for n = 2).  Output levels are clipped to the input's
    level range.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    A = np.cosh(R) - 1.0
    spec = m.spec
    h = spec.spacing
    centers = m.band_centers()
    flat = [(j, b, centers[j][b]) for j in range(m.n_levels) for b in range(m.M)]
    out = [np.zeros_like(mask) for mask in m.masks]
    wrap = spec.ext == "periodic"
    for js, bs, ys in flat:
        src = m.masks[js][bs]
        if not src.any():
            continue
        for jt, bt, yt in flat:
            rhs = 2.0 * ys * yt * A - (ys - yt) ** 2
            if rhs <= 0.0:
                continue
            r_cells = np.sqrt(rhs) / h
            if spec.n == 1:
                dil = _dilate_1d(src, r_cells, wrap)
            else:
                dil = _dilate_2d(src, r_cells, wrap)
            out[jt][bt] |= dil
    return RegionMask(spec=m.spec, M=m.M, masks=out)


def geodesic_length(p: HalfSpacePoint, q: HalfSpacePoint, steps: int = 10_000) -> float:
    """Numeric length of the geodesic between p and q (midpoint rule);
    converges to rho(p, q) as steps grows."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    px = np.asarray(p.x, dtype=float)
    qx = np.asarray(q.x, dtype=float)
    sep = float(np.linalg.norm(qx - px))
    if sep == 0.0:
        # vertical segment: integrate 1/y along it
        y0, y1 = sorted((p.y, q.y))
        if y0 == y1:
            return 0.0
        t = (np.arange(steps) + 0.5) / steps
        y = y0 + t * (y1 - y0)
        return float(np.sum((y1 - y0) / steps / y))
    # circular arc in the vertical plane through p and q, center (c, 0) on
    # the boundary, radius r; |gamma'(theta)| = r and gamma_y = r sin(theta)
    b = sep
    c = (b * b + q.y**2 - p.y**2) / (2.0 * b)
    r = float(np.hypot(c, p.y))
    th_p = float(np.arctan2(p.y, 0.0 - c))
    th_q = float(np.arctan2(q.y, b - c))
    lo, hi = sorted((th_p, th_q))
    t = lo + (np.arange(steps) + 0.5) / steps * (hi - lo)
    return float(np.sum((hi - lo) / steps / np.sin(t)))
