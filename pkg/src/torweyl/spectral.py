"""Dense linear-algebra layer.

Eigenvalues and singular values of shifted operators, log-determinants by
pivoted factorization, bordered (Grushin) block systems built from singular
pairs, coupling matrices of a potential against those pairs, and the scalar
functional-calculus identities for Hermitian positive matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .operators import GridParams, OperatorMatrix, convolution_matrix
from .symbols import Region, TrigPoly


class SolverError(RuntimeError):
    """The dense solver failed to converge."""


class SingularMatrixError(ValueError):
    """Log-determinant requested at a numerically singular shift."""


class DegenerateGapError(ValueError):
    """Projection rank falls inside a singular-value cluster."""


EIG_DIM_CAP = 4096


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, OperatorMatrix):
        return np.asarray(op.entries, dtype=complex)
    return np.asarray(op, dtype=complex)


def _grid_of(op) -> GridParams | None:
    return op.grid if isinstance(op, OperatorMatrix) else None


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    matrix_dim: int
    h: float | None
    max_residual: float


def eigenvalues(op, dim_cap: int = EIG_DIM_CAP) -> SpectrumResult:
    """All eigenvalues of the dense matrix, with per-pair residual checks."""
    a = _as_matrix(op)
    n = a.shape[0]
    if n > dim_cap:
        raise ValueError(f"matrix dimension {n} exceeds the configured cap {dim_cap}")
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigensolver did not converge: {exc}") from exc
    resid = a @ v - v * w[None, :]
    max_residual = float(np.max(np.linalg.norm(resid, axis=0)))
    grid = _grid_of(op)
    return SpectrumResult(
        eigenvalues=w,
        matrix_dim=n,
        h=grid.h if grid is not None else None,
        max_residual=max_residual,
    )


def count_in_region(result: SpectrumResult, region: Region) -> int:
    """Eigenvalues inside the closed region, listing multiplicity.

    Points exactly on the boundary count as inside.
    """
    return int(np.count_nonzero(region.contains(result.eigenvalues)))


def singular_values(op, z: complex = 0.0) -> np.ndarray:
    """Singular values of (M - z), ascending."""
    a = _as_matrix(op)
    shifted = a - z * np.eye(a.shape[0])
    try:
        sv = np.linalg.svd(shifted, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"SVD did not converge: {exc}") from exc
    return sv[::-1].copy()


def log_abs_det(op, z: complex = 0.0) -> float:
    """ln |det(M - z)| as the sum of pivot log-magnitudes of a pivoted LU."""
    a = _as_matrix(op)
    shifted = a - z * np.eye(a.shape[0])
    with warnings.catch_warnings():
        # an exactly zero pivot is reported as SingularMatrixError below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, _ = scipy.linalg.lu_factor(shifted, check_finite=False)
    diag = np.abs(np.diag(lu))
    if np.any(diag == 0.0):
        smallest = float(singular_values(shifted)[0])
        raise SingularMatrixError(
            f"M - z is singular to working precision (smallest singular "
            f"value {smallest:.3e})"
        )
    return float(np.sum(np.log(diag)))


# ---------------------------------------------------------------------------
# Grushin block systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrushinSolution:
    n_small: int
    t: np.ndarray
    e: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    e_minus_plus: np.ndarray
    block_matrix: np.ndarray


def _singular_frame(shifted: np.ndarray, n_small: int):
    """Lowest n_small singular triples, ascending, with a gap check."""
    n = shifted.shape[0]
    if not (1 <= n_small <= n):
        raise ValueError(f"n_small must lie in [1, {n}]")
    try:
        u, sv, vh = np.linalg.svd(shifted)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"SVD did not converge: {exc}") from exc
    order = np.argsort(sv)
    t = sv[order]
    if n_small < n and t[n_small] - t[n_small - 1] <= 1e-12:
        raise DegenerateGapError(
            f"singular values t_{n_small} = {t[n_small - 1]:.3e} and "
            f"t_{n_small + 1} = {t[n_small]:.3e} are not separated"
        )
    e_vecs = vh.conj().T[:, order[:n_small]]
    f_vecs = u[:, order[:n_small]]
    return t, e_vecs, f_vecs


def grushin_solve(op, z: complex, n_small: int) -> GrushinSolution:
    """Solve the bordered system built from the lowest singular pairs.

    With (M - z) e_j = t_j f_j the block matrix [[M - z, R_-], [R_+, 0]] is
    inverted; for the defining matrix itself the corner block is -diag(t_j).
    """
    a = _as_matrix(op)
    shifted = a - z * np.eye(a.shape[0])
    t, e_vecs, f_vecs = _singular_frame(shifted, n_small)
    n = shifted.shape[0]
    block = np.zeros((n + n_small, n + n_small), dtype=complex)
    block[:n, :n] = shifted
    block[:n, n:] = f_vecs
    block[n:, :n] = e_vecs.conj().T
    try:
        inv = np.linalg.solve(block, np.eye(n + n_small, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"bordered system is singular: {exc}") from exc
    return GrushinSolution(
        n_small=n_small,
        t=t,
        e=inv[:n, :n],
        e_plus=inv[:n, n:],
        e_minus=inv[n:, :n],
        e_minus_plus=inv[n:, n:],
        block_matrix=block,
    )


def det_factorization_residual(op, z: complex, n_small: int) -> float:
    """Relative defect of ln|det(M - z)| = ln|det block| + ln|det corner|."""
    if n_small == 0:
        return 0.0
    sol = grushin_solve(op, z, n_small)
    ld_full = log_abs_det(op, z)
    lu, _ = scipy.linalg.lu_factor(sol.block_matrix, check_finite=False)
    ld_block = float(np.sum(np.log(np.abs(np.diag(lu)))))
    ld_corner = float(np.linalg.slogdet(sol.e_minus_plus)[1])
    return abs(ld_full - (ld_block + ld_corner)) / abs(ld_full)


def coupling_matrix(q: TrigPoly, e_vectors: np.ndarray,
                    f_vectors: np.ndarray) -> np.ndarray:
    """M_{jk} = <Conv(q) e_k, f_j> for Fourier-basis column vectors."""
    e = np.asarray(e_vectors, dtype=complex)
    f = np.asarray(f_vectors, dtype=complex)
    if e.shape != f.shape:
        raise ValueError(f"vector blocks differ in shape: {e.shape} vs {f.shape}")
    n = e.shape[0]
    if n % 2 == 0:
        raise ValueError("Fourier-basis vectors must have odd length 2K + 1")
    grid = GridParams(h=1.0, K=(n - 1) // 2)
    conv = convolution_matrix(q, grid)
    return f.conj().T @ (conv @ e)


# ---------------------------------------------------------------------------
# functional calculus on Hermitian positive matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpFunction:
    """chi_c(t) = exp(1 - 1/(1 - (t/c)^2)) on [0, c), zero beyond.

    Extended evenly to t < 0, so chi is smooth with chi(0) = 1 > 0, and the
    derivative is available in closed form.
    """

    c: float = 1.0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("support radius c must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        u = np.abs(t) / self.c
        out = np.zeros(u.shape)
        mask = u < 1.0
        um = u[mask]
        out[mask] = np.exp(1.0 - 1.0 / (1.0 - um**2))
        return out

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        u = t / self.c
        out = np.zeros(u.shape)
        mask = np.abs(u) < 1.0
        um = u[mask]
        chi = np.exp(1.0 - 1.0 / (1.0 - um**2))
        out[mask] = chi * (-2.0 * um / (self.c * (1.0 - um**2) ** 2))
        return out

    def psi(self, t):
        """(chi - t * chi')/(t + chi); the derivative kernel of the
        regularized log-determinant."""
        t = np.asarray(t, dtype=float)
        chi = self(t)
        return (chi - t * self.deriv(t)) / (t + chi)


@dataclass(frozen=True)
class FunctionalResult:
    trace_val: float
    logdet_reg: float
    deriv_residual: float


def spectral_functional(op, chi: BumpFunction, alpha: float, t_probe: float,
                        hermitian_tol: float = 1e-12) -> FunctionalResult:
    """Trace and regularized log-det of a Hermitian PSD matrix.

    trace_val   = sum chi(lambda_j / alpha)
    logdet_reg  = sum ln(lambda_j + alpha * chi(lambda_j / alpha))
    deriv_residual compares a central finite difference of
    t -> sum ln(lambda_j + t chi(lambda_j / t)) at t_probe against the exact
    derivative sum (1/t) psi(lambda_j / t); the identity is exact eigenvalue
    by eigenvalue, so the residual is finite-difference noise only.
    """
    a = _as_matrix(op)
    herm_defect = np.linalg.norm(a - a.conj().T)
    scale = max(1.0, float(np.linalg.norm(a)))
    if herm_defect > hermitian_tol * scale:
        raise ValueError(
            f"matrix is not Hermitian to tolerance: defect {herm_defect:.3e}"
        )
    if not (0.0 < alpha < 1.0) or not (0.0 < t_probe < 1.0):
        raise ValueError("alpha and t_probe must lie in (0, 1)")
    lam = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    trace_val = float(np.sum(chi(lam / alpha)))
    logdet_reg = float(np.sum(np.log(lam + alpha * chi(lam / alpha))))

    def reg_logdet(t: float) -> float:
        return float(np.sum(np.log(lam + t * chi(lam / t))))

    step = 1e-5 * t_probe
    fd = (reg_logdet(t_probe + step) - reg_logdet(t_probe - step)) / (2.0 * step)
    exact = float(np.sum(chi.psi(lam / t_probe)) / t_probe)
    return FunctionalResult(
        trace_val=trace_val,
        logdet_reg=logdet_reg,
        deriv_residual=abs(fd - exact),
    )


def pseudospectrum(op, z_grid: Sequence[complex]) -> list[float]:
    """Smallest singular value of M - z per grid point.

    A solver failure at one point is recorded as NaN for that point; the
    rest of the grid still evaluates.
    """
    a = _as_matrix(op)
    eye = np.eye(a.shape[0])
    out = []
    for z in z_grid:
        try:
            sv = np.linalg.svd(a - z * eye, compute_uv=False)
            out.append(float(sv[-1]))
        except np.linalg.LinAlgError:
            out.append(float("nan"))
    return out
