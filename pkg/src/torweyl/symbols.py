"""Symbols p(x, xi) on the phase space of the 1-torus.

A symbol is a polynomial in the frequency variable xi whose coefficients are
finite Fourier series in x.  This module carries the structural checks
(classical ellipticity, evenness in xi) and all phase-space volume
computations: preimage measures of spectral-plane regions by midpoint
quadrature, and the log-log slope diagnostic for the small-t growth exponent
of sublevel-set volumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union

import numpy as np

TWO_PI = 2.0 * math.pi


class ContainmentError(ValueError):
    """The quadrature grid does not certifiably contain the preimage."""


class DegenerateFitError(ValueError):
    """A sublevel-set volume vanished inside the requested t-range."""


# ---------------------------------------------------------------------------
# trigonometric polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrigPoly:
    """Finite Fourier series u(x) = sum_k c_k e^{ikx} on [0, 2*pi).

    ``coeffs`` maps integer frequencies to complex amplitudes; exact zeros are
    dropped so the zero polynomial has an empty map.  A polynomial flagged
    ``real`` must satisfy c_{-k} == conj(c_k) exactly.
    """

    coeffs: Mapping[int, complex] = field(default_factory=dict)
    real: bool = False

    def __post_init__(self):
        clean = {int(k): complex(c) for k, c in self.coeffs.items() if c != 0}
        object.__setattr__(self, "coeffs", clean)
        if self.real:
            for k, c in clean.items():
                if clean.get(-k, 0j) != c.conjugate():
                    raise ValueError(
                        f"real-flagged TrigPoly violates c_-k = conj(c_k) at k={k}"
                    )

    @classmethod
    def zero(cls) -> "TrigPoly":
        return cls({})

    @classmethod
    def constant(cls, c: complex) -> "TrigPoly":
        return cls({0: c}, real=bool(complex(c).imag == 0.0))

    @classmethod
    def cosine(cls, k: int = 1, amp: float = 1.0) -> "TrigPoly":
        return cls({k: amp / 2.0, -k: amp / 2.0}, real=True)

    @classmethod
    def wave(cls, k: int, amp: complex = 1.0) -> "TrigPoly":
        """Single exponential amp * e^{ikx}."""
        return cls({k: amp})

    @property
    def bandwidth(self) -> int:
        return max((abs(k) for k in self.coeffs), default=0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def mean(self) -> complex:
        return self.coeffs.get(0, 0j)

    def sup_bound(self) -> float:
        """Rigorous sup-norm bound: the l1 mass of the coefficients."""
        return float(sum(abs(c) for c in self.coeffs.values()))

    def __call__(self, x):
        """Evaluate at x (scalar or ndarray).

        Frequencies are paired as (+k, -k) so that conjugate-symmetric
        coefficients cancel their imaginary parts exactly in floating point.
        """
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.coeffs.get(0, 0j), dtype=complex)
        done = {0}
        for k in sorted(self.coeffs, key=abs):
            if k in done:
                continue
            done.update((k, -k))
            kk = abs(k)
            ek = np.exp(1j * kk * x)
            pair = self.coeffs.get(kk, 0j) * ek + self.coeffs.get(-kk, 0j) * np.conj(ek)
            out = out + pair
        return out

    def uniform_samples(self, n: int) -> np.ndarray:
        """Values at x_j = 2*pi*j/n via FFT; needs n > 2 * bandwidth.

        Much faster than ``__call__`` when the polynomial carries many modes.
        """
        if n <= 2 * self.bandwidth:
            raise ValueError(f"n = {n} aliases bandwidth {self.bandwidth}")
        spectrum = np.zeros(n, dtype=complex)
        for k, c in self.coeffs.items():
            spectrum[k % n] += c
        return np.fft.ifft(spectrum) * n

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        merged = dict(self.coeffs)
        for k, c in other.coeffs.items():
            merged[k] = merged.get(k, 0j) + c
        return TrigPoly(merged, real=self.real and other.real)

    def __mul__(self, other: "TrigPoly") -> "TrigPoly":
        """Pointwise product; coefficient convolution."""
        out: dict[int, complex] = {}
        for k1, c1 in self.coeffs.items():
            for k2, c2 in other.coeffs.items():
                k = k1 + k2
                out[k] = out.get(k, 0j) + c1 * c2
        return TrigPoly(out, real=self.real and other.real)

    def scaled(self, factor: complex) -> "TrigPoly":
        f = complex(factor)
        return TrigPoly(
            {k: f * c for k, c in self.coeffs.items()},
            real=self.real and f.imag == 0.0,
        )

    def items(self) -> Iterator[tuple[int, complex]]:
        return iter(sorted(self.coeffs.items()))


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymbolSpec:
    """An order-m symbol p(x, xi) = sum_{a<=m} a_a(x) xi^a.

    ``a`` lists the coefficient Fourier series for xi^0 .. xi^m.  Optional
    ``h_corrections`` hold the first-order-in-h parts of the lower-order
    coefficients; the top coefficient admits none.
    """

    m: int
    a: tuple[TrigPoly, ...]
    h_corrections: tuple[TrigPoly, ...] | None = None

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("symbol order must be non-negative")
        if len(self.a) != self.m + 1:
            raise ValueError(f"expected {self.m + 1} coefficients, got {len(self.a)}")
        object.__setattr__(self, "a", tuple(self.a))
        if self.h_corrections is not None:
            hc = tuple(self.h_corrections)
            if len(hc) != self.m + 1:
                raise ValueError("h_corrections must match coefficient count")
            if not hc[self.m].is_zero():
                raise ValueError("top-order coefficient must not carry an h correction")
            object.__setattr__(self, "h_corrections", hc)

    @property
    def top(self) -> TrigPoly:
        return self.a[self.m]

    def eval_principal(self, x, xi):
        """p(x, xi) by Horner recursion in xi; broadcasts over arrays."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = np.broadcast_to(self.a[self.m](x), np.broadcast_shapes(x.shape, xi.shape)).copy()
        for alpha in range(self.m - 1, -1, -1):
            out = out * xi + self.a[alpha](x)
        return out

    def eval_degree_m(self, x, xi):
        xi = np.asarray(xi, dtype=float)
        return self.a[self.m](np.asarray(x, dtype=float)) * xi**self.m

    def lower_order_sup_bounds(self) -> list[float]:
        return [self.a[alpha].sup_bound() for alpha in range(self.m)]


def eval_symbol(spec: SymbolSpec, x, xi, which: str = "principal"):
    """Evaluate the principal symbol or just its degree-m part."""
    if which == "principal":
        return spec.eval_principal(x, xi)
    if which == "degree-m-part":
        return spec.eval_degree_m(x, xi)
    raise ValueError(f"unknown evaluation kind {which!r}")


def check_ellipticity(spec: SymbolSpec, x_samples: int = 256) -> tuple[bool, float]:
    """Sampled classical-ellipticity test.

    Returns (holds, C) with |p_m(x, xi)| >= |xi|^m / C on the sample grid.
    A top coefficient vanishing on the grid (to relative machine level, so
    that an exact zero hit by rounding still counts) yields (False, inf).
    """
    if x_samples < 16:
        raise ValueError("x_samples must be at least 16")
    x = np.arange(x_samples) * (TWO_PI / x_samples)
    vals = np.abs(spec.top(x))
    amin = float(np.min(vals))
    if amin <= 1e-12 * float(np.max(vals)):
        return False, math.inf
    return True, 1.0 / amin


def check_symmetry(spec: SymbolSpec) -> bool:
    """Exact coefficient-level test that p(x, -xi) = p(x, xi)."""
    return all(spec.a[alpha].is_zero() for alpha in range(1, spec.m + 1, 2))


# ---------------------------------------------------------------------------
# spectral-plane regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def __post_init__(self):
        if self.re_lo > self.re_hi or self.im_lo > self.im_hi:
            raise ValueError("degenerate rectangle bounds")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return (
            (z.real >= self.re_lo)
            & (z.real <= self.re_hi)
            & (z.imag >= self.im_lo)
            & (z.imag <= self.im_hi)
        )

    def boundary_distance(self, z):
        """Distance from z to the rectangle's boundary curve."""
        z = np.asarray(z, dtype=complex)
        dx_out = np.maximum.reduce([self.re_lo - z.real, z.real - self.re_hi,
                                    np.zeros(z.shape)])
        dy_out = np.maximum.reduce([self.im_lo - z.imag, z.imag - self.im_hi,
                                    np.zeros(z.shape)])
        outside = np.hypot(dx_out, dy_out)
        inside = np.minimum.reduce([z.real - self.re_lo, self.re_hi - z.real,
                                    z.imag - self.im_lo, self.im_hi - z.imag])
        return np.where(outside > 0.0, outside, np.maximum(inside, 0.0))

    def sup_abs(self) -> float:
        corners = [complex(r, i) for r in (self.re_lo, self.re_hi)
                   for i in (self.im_lo, self.im_hi)]
        return max(abs(c) for c in corners)

    def boundary_points(self, n: int) -> np.ndarray:
        """n points equally spaced in arclength along the boundary."""
        w = self.re_hi - self.re_lo
        ht = self.im_hi - self.im_lo
        perim = 2.0 * (w + ht)
        ts = (np.arange(n) + 0.5) / n * perim
        pts = np.empty(n, dtype=complex)
        for i, t in enumerate(ts):
            if t < w:
                pts[i] = complex(self.re_lo + t, self.im_lo)
            elif t < w + ht:
                pts[i] = complex(self.re_hi, self.im_lo + (t - w))
            elif t < 2 * w + ht:
                pts[i] = complex(self.re_hi - (t - w - ht), self.im_hi)
            else:
                pts[i] = complex(self.re_lo, self.im_hi - (t - 2 * w - ht))
        return pts


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("disk radius must be non-negative")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(z - self.center) <= self.radius

    def boundary_distance(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(np.abs(z - self.center) - self.radius)

    def sup_abs(self) -> float:
        return abs(self.center) + self.radius

    def boundary_points(self, n: int) -> np.ndarray:
        th = TWO_PI * (np.arange(n) + 0.5) / n
        return self.center + self.radius * np.exp(1j * th)


@dataclass(frozen=True)
class BoundaryTube:
    """Closed r-neighborhood of the boundary of a rectangle or disk."""

    base: Union[Rectangle, Disk]
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("tube radius must be positive")
        if not isinstance(self.base, (Rectangle, Disk)):
            raise TypeError("boundary tube base must be a rectangle or a disk")

    def contains(self, z):
        return self.base.boundary_distance(z) <= self.r

    def sup_abs(self) -> float:
        return self.base.sup_abs() + self.r


Region = Union[Rectangle, Disk, BoundaryTube]


# ---------------------------------------------------------------------------
# quadrature grids and certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseGrid:
    """Midpoint tensor grid over [0, 2*pi) x [xi_lo, xi_hi]."""

    n_x: int
    xi_lo: float
    xi_hi: float
    n_xi: int

    def __post_init__(self):
        if self.n_x < 1 or self.n_xi < 1:
            raise ValueError("grid must have at least one cell per axis")
        if not self.xi_lo < self.xi_hi:
            raise ValueError("xi bounds must be increasing")

    def x_nodes(self) -> np.ndarray:
        return (np.arange(self.n_x) + 0.5) * (TWO_PI / self.n_x)

    def xi_nodes(self) -> np.ndarray:
        step = (self.xi_hi - self.xi_lo) / self.n_xi
        return self.xi_lo + (np.arange(self.n_xi) + 0.5) * step

    @property
    def cell_area(self) -> float:
        return (TWO_PI / self.n_x) * ((self.xi_hi - self.xi_lo) / self.n_xi)


def symbol_floor(spec: SymbolSpec, r: float, ell_constant: float) -> float:
    """Crude lower bound for |p(x, xi)| at |xi| = r.

    Uses |p| >= |xi|^m / C - sum of the lower-order coefficient sup norms
    times |xi|^a.  Loose by design; looseness only enlarges grids.
    """
    sups = spec.lower_order_sup_bounds()
    return r**spec.m / ell_constant - sum(s * r**a for a, s in enumerate(sups))


def _floor_slope(spec: SymbolSpec, r: float, ell_constant: float) -> float:
    sups = spec.lower_order_sup_bounds()
    slope = spec.m * r ** (spec.m - 1) / ell_constant if spec.m >= 1 else 0.0
    return slope - sum(a * s * r ** (a - 1) for a, s in enumerate(sups) if a >= 1)


def certify_grid(spec: SymbolSpec, region: Region, grid: PhaseGrid) -> tuple[bool, str]:
    """Check that the grid's xi-slab contains the preimage of the region.

    At both xi endpoints the ellipticity floor must exceed sup |z| over the
    region and be non-decreasing there, so the floor stays above the region
    for every xi outside the slab.
    """
    holds, c = check_ellipticity(spec)
    if not holds:
        return False, "top coefficient vanishes on the sample grid"
    target = region.sup_abs()
    for r in (abs(grid.xi_lo), abs(grid.xi_hi)):
        val = symbol_floor(spec, r, c)
        if not val > target:
            return False, (
                f"floor |xi|^m/C - lower-order sup = {val:.6g} at |xi|={r:.6g} "
                f"does not exceed sup|z| = {target:.6g} over the region"
            )
        if _floor_slope(spec, r, c) < 0.0:
            return False, (
                f"ellipticity floor is decreasing at |xi|={r:.6g}; "
                "enlarge the xi bounds"
            )
    return True, "certified"


def certified_xi_bound(spec: SymbolSpec, region: Region) -> float:
    """Smallest xi magnitude (within 1%) whose floor certifies the region."""
    holds, c = check_ellipticity(spec)
    if not holds:
        raise ContainmentError("symbol is not elliptic; no xi bound exists")
    target = region.sup_abs()
    if spec.m == 0:
        if symbol_floor(spec, 1.0, c) > target:
            return 1.0
        raise ContainmentError(
            "order-0 symbol cannot certify a compact preimage for this region"
        )

    def ok(r: float) -> bool:
        return symbol_floor(spec, r, c) > target and _floor_slope(spec, r, c) >= 0.0

    hi = 1.0
    for _ in range(200):
        if ok(hi):
            break
        hi *= 2.0
    else:
        raise ContainmentError("no certified xi bound below 2^200")
    lo = hi / 2.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 0.01 * hi:
            break
    return hi


def default_grid(spec: SymbolSpec, region: Region,
                 n_x: int = 512, n_xi: int = 512) -> PhaseGrid:
    xb = certified_xi_bound(spec, region)
    return PhaseGrid(n_x=n_x, xi_lo=-xb, xi_hi=xb, n_xi=n_xi)


# ---------------------------------------------------------------------------
# volumes
# ---------------------------------------------------------------------------

_CHUNK_ROWS = 128


def volume_preimage(spec: SymbolSpec, region: Region, grid: PhaseGrid) -> float:
    """Midpoint-rule measure of {(x, xi) : p(x, xi) in region}."""
    ok, msg = certify_grid(spec, region, grid)
    if not ok:
        raise ContainmentError(msg)
    x = grid.x_nodes()
    xi = grid.xi_nodes()
    count = 0
    for lo in range(0, grid.n_x, _CHUNK_ROWS):
        vals = spec.eval_principal(x[lo:lo + _CHUNK_ROWS, None], xi[None, :])
        count += int(np.count_nonzero(region.contains(vals)))
    return count * grid.cell_area


def sublevel_volumes(spec: SymbolSpec, z: complex, t_values,
                     grid: PhaseGrid) -> np.ndarray:
    """Volumes of {|p - z|^2 <= t} for every t in one sweep of the grid."""
    t = np.asarray(t_values, dtype=float)
    ok, msg = certify_grid(spec, Disk(z, math.sqrt(float(t.max()))), grid)
    if not ok:
        raise ContainmentError(msg)
    x = grid.x_nodes()
    xi = grid.xi_nodes()
    counts = np.zeros(t.shape, dtype=np.int64)
    for lo in range(0, grid.n_x, _CHUNK_ROWS):
        vals = spec.eval_principal(x[lo:lo + _CHUNK_ROWS, None], xi[None, :])
        s = np.abs(vals - z) ** 2
        counts += (s.ravel()[:, None] <= t[None, :]).sum(axis=0)
    return counts * grid.cell_area


def boundary_cell_measure(spec: SymbolSpec, region: Region, grid: PhaseGrid) -> float:
    """Total measure of cells whose corners disagree about membership.

    This is the midpoint rule's bookkeeping quantity: refining the grid can
    move the measure only within the boundary cells.
    """
    x = np.arange(grid.n_x + 1) * (TWO_PI / grid.n_x)
    step = (grid.xi_hi - grid.xi_lo) / grid.n_xi
    xi = grid.xi_lo + np.arange(grid.n_xi + 1) * step
    inside = np.empty((grid.n_x + 1, grid.n_xi + 1), dtype=bool)
    for lo in range(0, grid.n_x + 1, _CHUNK_ROWS):
        vals = spec.eval_principal(x[lo:lo + _CHUNK_ROWS, None], xi[None, :])
        inside[lo:lo + _CHUNK_ROWS] = region.contains(vals)
    cells = inside[:-1, :-1] | inside[1:, :-1] | inside[:-1, 1:] | inside[1:, 1:]
    full = inside[:-1, :-1] & inside[1:, :-1] & inside[:-1, 1:] & inside[1:, 1:]
    return int(np.count_nonzero(cells & ~full)) * grid.cell_area


def estimate_kappa(spec: SymbolSpec, z: complex, t_lo: float, t_hi: float,
                   n_points: int, grid: PhaseGrid | None = None) -> tuple[float, float]:
    """Least-squares slope of log V_z(t) against log t on a geometric grid.

    Returns (slope, r2).  Only finite scales are observable, so this reports
    a fit, never a certified exponent.
    """
    if not (0.0 < t_lo < t_hi):
        raise ValueError("need 0 < t_lo < t_hi")
    if n_points < 4:
        raise ValueError("need at least 4 sample points")
    if grid is None:
        grid = default_grid(spec, Disk(z, math.sqrt(t_hi)), n_x=2048, n_xi=2048)
    t = np.geomspace(t_lo, t_hi, n_points)
    vols = sublevel_volumes(spec, z, t, grid)
    if np.any(vols == 0.0):
        raise DegenerateFitError(
            f"V_z(t) vanished for some t in [{t_lo:g}, {t_hi:g}]; "
            "z lies outside the closure of the symbol range at that scale"
        )
    lt = np.log(t)
    lv = np.log(vols)
    slope, intercept = np.polyfit(lt, lv, 1)
    fit = slope * lt + intercept
    ss_res = float(np.sum((lv - fit) ** 2))
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def range_samples(spec: SymbolSpec, grid: PhaseGrid, max_samples: int = 200_000) -> np.ndarray:
    """Flattened samples of p over the grid, decimated to max_samples."""
    x = grid.x_nodes()
    xi = grid.xi_nodes()
    total = grid.n_x * grid.n_xi
    stride = max(1, total // max_samples)
    vals = []
    for lo in range(0, grid.n_x, _CHUNK_ROWS):
        block = spec.eval_principal(x[lo:lo + _CHUNK_ROWS, None], xi[None, :])
        vals.append(block.ravel()[::stride])
    return np.concatenate(vals)


def distance_to_samples(samples: np.ndarray, z) -> np.ndarray:
    """Min distance from each z to the sampled symbol values."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty(z.shape, dtype=float)
    for i, zz in enumerate(z):
        out[i] = float(np.min(np.abs(samples - zz)))
    return out


# ---------------------------------------------------------------------------
# model catalog
# ---------------------------------------------------------------------------

def catalog_symbol(name: str) -> SymbolSpec:
    """Built-in models used throughout the experiments and the CLI.

    ``xi2+exp(ix)``   : p = xi^2 + e^{ix}, order 2, even in xi.
    ``xi+exp(-ix)``   : p = xi + e^{-ix}, order 1 (odd, no symmetry).
    """
    if name == "xi2+exp(ix)":
        return SymbolSpec(m=2, a=(TrigPoly.wave(1), TrigPoly.zero(),
                                  TrigPoly.constant(1.0)))
    if name == "xi+exp(-ix)":
        return SymbolSpec(m=1, a=(TrigPoly.wave(-1), TrigPoly.constant(1.0)))
    raise KeyError(f"unknown catalog symbol {name!r}")
