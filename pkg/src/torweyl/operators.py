"""Dense matrix realizations in the truncated Fourier basis.

Basis convention: eps_k(x) = e^{ikx} / sqrt(2*pi) for k = -K..K, so an
h-differential operator is a sum of Toeplitz convolution factors times
diagonal frequency powers, and a general symbol is quantized by sampling
x on a uniform grid (Kohn-Nirenberg, symbol to the left).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .symbols import TWO_PI, PhaseGrid, SymbolSpec, TrigPoly


class BandwidthError(ValueError):
    """A coefficient's Fourier support exceeds what the truncation holds."""


class GuardError(RuntimeError):
    """No shifted symbol in the search family cleared the separation guard."""


@dataclass(frozen=True)
class GridParams:
    """Semiclassical parameter and Fourier truncation; dimension N = 2K + 1."""

    h: float
    K: int

    def __post_init__(self):
        if not (0.0 < self.h <= 1.0):
            raise ValueError("h must lie in (0, 1]")
        if self.K < 1:
            raise ValueError("K must be at least 1")

    @property
    def N(self) -> int:
        return 2 * self.K + 1

    def k_values(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray
    grid: GridParams

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.shape != (self.grid.N, self.grid.N):
            raise ValueError(f"entries must be {self.grid.N}x{self.grid.N}")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)


def convolution_matrix(u: TrigPoly, grid: GridParams, *, label: str = "q") -> np.ndarray:
    """Toeplitz matrix of multiplication by u: entry (j, k) = c_{j-k}."""
    if u.bandwidth > 2 * grid.K:
        raise BandwidthError(
            f"coefficient {label} has bandwidth {u.bandwidth} > 2K = {2 * grid.K}"
        )
    n = grid.N
    out = np.zeros((n, n), dtype=complex)
    for k, c in u.items():
        out += c * np.eye(n, k=-k)
    return out


def assemble_differential(spec: SymbolSpec, grid: GridParams) -> OperatorMatrix:
    """Matrix of sum_a a_a(x) (hD)^a, plus h times any first-order corrections."""
    w = (grid.h * grid.k_values()).astype(float)
    total = np.zeros((grid.N, grid.N), dtype=complex)
    for alpha in range(spec.m + 1):
        coeff = spec.a[alpha]
        if coeff.is_zero():
            continue
        conv = convolution_matrix(coeff, grid, label=f"a_{alpha}")
        total += conv * (w**alpha)[None, :]
    if spec.h_corrections is not None:
        for alpha in range(spec.m + 1):
            corr = spec.h_corrections[alpha]
            if corr.is_zero():
                continue
            conv = convolution_matrix(corr, grid, label=f"h-correction a_{alpha}")
            total += grid.h * conv * (w**alpha)[None, :]
    return OperatorMatrix(total, grid)


def assemble_multiplier(q: TrigPoly, grid: GridParams) -> OperatorMatrix:
    return OperatorMatrix(convolution_matrix(q, grid), grid)


def assemble_toroidal_pdo(symbol: Callable, grid: GridParams,
                          n_x: int | None = None) -> OperatorMatrix:
    """Kohn-Nirenberg quantization of a general symbol(x, xi).

    Entry (j, k) = (1/n_x) sum_x symbol(x, h k) e^{-i (j-k) x} over the
    uniform x-grid.  ``symbol`` must accept broadcast ndarray arguments.
    n_x >= 4K + 4 removes aliasing for bandwidth-2K symbols.
    """
    if n_x is None:
        n_x = 4 * grid.K + 4
    if n_x < 4 * grid.K + 4:
        raise ValueError(f"n_x must be at least 4K + 4 = {4 * grid.K + 4}")
    x = np.arange(n_x) * (TWO_PI / n_x)
    k = grid.k_values()
    vals = np.asarray(symbol(x[:, None], grid.h * k[None, :]), dtype=complex)
    spectra = np.fft.fft(vals, axis=0) / n_x
    offset = (k[:, None] - k[None, :]) % n_x
    entries = spectra[offset, np.arange(grid.N)[None, :]]
    return OperatorMatrix(entries, grid)


# ---------------------------------------------------------------------------
# semiclassical Sobolev norms
# ---------------------------------------------------------------------------

def hs_norm(q: TrigPoly, s: float, h: float, mode: str = "semiclassical") -> float:
    """Fourier-weighted norm (sum_k (1 + (hk)^2)^s |<q, eps_k>|^2)^{1/2}.

    ``classical`` mode is the plain Sobolev norm (h frozen to 1).  The inner
    products against the normalized exponentials are sqrt(2*pi) c_k.
    """
    if mode == "classical":
        h = 1.0
    elif mode != "semiclassical":
        raise ValueError(f"unknown norm mode {mode!r}")
    total = 0.0
    for k, c in q.items():
        total += (1.0 + (h * k) ** 2) ** s * TWO_PI * abs(c) ** 2
    return math.sqrt(total)


def sup_norm(q: TrigPoly, n_samples: int = 4096) -> float:
    """Max of |q| on a uniform grid (dense enough for band-limited q)."""
    n = max(n_samples, 4 * q.bandwidth + 4)
    return float(np.max(np.abs(q.uniform_samples(n))))


# ---------------------------------------------------------------------------
# shifted symbols: p moved off a set of target points
# ---------------------------------------------------------------------------

def bump_profile(t):
    """Smooth cutoff equal to 1 on [0, 1], supported in [0, 2]."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    out[t <= 1.0] = 1.0
    mid = (t > 1.0) & (t < 2.0)
    u = t[mid] - 1.0
    fa = np.exp(-1.0 / (1.0 - u))
    fb = np.exp(-1.0 / u)
    out[mid] = fa / (fa + fb)
    return out


def make_shifted_symbol(spec: SymbolSpec, z_center: complex,
                        rho: float, shift: float) -> Callable:
    """Symbol equal to p outside |p - z_center| <= 2*rho, pushed upward inside."""

    def shifted(x, xi):
        p = spec.eval_principal(x, xi)
        return p + 1j * shift * bump_profile(np.abs(p - z_center) / rho)

    return shifted


def make_lifted_symbol(spec: SymbolSpec, shift: float,
                       xi_on: float, xi_off: float) -> Callable:
    """Symbol pushed upward on the whole frequency window |xi| <= xi_on.

    Unlike a bump in the symbol's values, lifting entire x-rows removes any
    winding of x -> p(x, xi) around the target points, which is what keeps
    the quantization of (ptilde - z) safely invertible.
    """
    if not xi_on < xi_off:
        raise ValueError("need xi_on < xi_off")
    width = xi_off - xi_on

    def lifted(x, xi):
        xi = np.asarray(xi, dtype=float)
        profile = bump_profile(1.0 + (np.abs(xi) - xi_on) / width)
        return spec.eval_principal(x, xi) + 1j * shift * profile

    return lifted


def find_shifted_symbol(
    spec: SymbolSpec,
    z_center: complex,
    test_points: Sequence[complex],
    phase_grid: PhaseGrid,
    guard: float = 0.1,
    shifts: Sequence[float] = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0),
    rhos: Sequence[float] | None = None,
) -> tuple[Callable, float, float]:
    """Grid-search a (shift, rho) pair so the shifted symbol clears the guard.

    Validates min over the phase grid and over every test point z of
    |p~ - z| >= guard.  Returns (symbol, shift, rho) or raises GuardError.
    """
    pts = np.asarray(list(test_points), dtype=complex)
    if rhos is None:
        base = float(np.max(np.abs(pts - z_center))) + 0.25 if len(pts) else 0.5
        rhos = (base, 1.3 * base, 1.7 * base)
    x = phase_grid.x_nodes()
    xi = phase_grid.xi_nodes()
    p = spec.eval_principal(x[:, None], xi[None, :]).ravel()
    for rho in rhos:
        prof = bump_profile(np.abs(p - z_center) / rho)
        for shift in shifts:
            moved = p + 1j * shift * prof
            clear = min(float(np.min(np.abs(moved - z))) for z in pts)
            if clear >= guard:
                return make_shifted_symbol(spec, z_center, rho, shift), shift, rho
    raise GuardError(
        f"no (shift, rho) in the search family kept the shifted symbol "
        f"{guard:g} away from all test points"
    )
