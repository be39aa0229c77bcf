"""End-to-end experiments.

Builds the operator for each h, derives the perturbation plan, runs seeded
Monte Carlo trials, and compares eigenvalue counts in a spectral-plane
region against the phase-space volume prediction vol(p^{-1}(Gamma))/(2 pi h).
Also houses the transport-line counterexample harness (hD + g has a line
spectrum no multiplicative perturbation can spread), singular-value ladder
diagnostics, and the trace / log-determinant quadrature comparisons.
"""

from __future__ import annotations

import concurrent.futures
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import (
    GridParams,
    GuardError,
    OperatorMatrix,
    assemble_differential,
    assemble_toroidal_pdo,
    find_shifted_symbol,
    make_lifted_symbol,
)
from .perturbation import (
    PerturbationPlan,
    build_perturbed,
    derive_params,
    sample_potential,
    split_seed,
)
from .spectral import (
    BumpFunction,
    SingularMatrixError,
    count_in_region,
    eigenvalues,
    log_abs_det,
    singular_values,
)
from .symbols import (
    TWO_PI,
    BoundaryTube,
    Disk,
    PhaseGrid,
    Rectangle,
    Region,
    SymbolSpec,
    TrigPoly,
    certified_xi_bound,
    check_ellipticity,
    check_symmetry,
    distance_to_samples,
    range_samples,
    volume_preimage,
)


class InvalidConfigError(ValueError):
    """The experiment configuration violates a structural requirement."""


class ResolutionError(ValueError):
    """The truncation cannot resolve the requested quasimode."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    spec: SymbolSpec
    region: Region
    omega: Region
    h_list: tuple[float, ...]
    s: float = 2.0
    epsilon: float = 0.5
    kappa: object = "auto"          # "auto" means the universal floor 1/(2m)
    tau0: float | None = None       # None means sqrt(h), per h
    mode: str = "effective"
    delta_eff: float | None = 1e-12
    n_trials: int = 20
    master_seed: int = 0
    k_rule: object = "auto"         # "auto" or an explicit K
    z_probes: tuple[complex, ...] | None = None
    n_probes: int = 5
    tube_r: float = 0.05
    rel_tol: float = 0.15
    eps_tilde_factor: float = 10.0
    real_potentials: bool = False
    require_symmetry: bool = True
    vol_n_x: int = 512
    vol_n_xi: int = 512
    omega_clearance: float = 0.05

    def resolved_kappa(self) -> float:
        if self.kappa == "auto":
            return 1.0 / (2.0 * self.spec.m)
        return float(self.kappa)

    def as_dict(self) -> dict:
        from . import serialize

        return {
            "symbol": serialize.dumps_symbol(self.spec),
            "region": serialize.dumps_region(self.region),
            "omega": serialize.dumps_region(self.omega),
            "h_list": list(self.h_list),
            "s": self.s,
            "epsilon": self.epsilon,
            "kappa": "auto" if self.kappa == "auto" else float(self.kappa),
            "kappa_resolved": self.resolved_kappa(),
            "tau0": self.tau0,
            "mode": self.mode,
            "delta_eff": self.delta_eff,
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "k_rule": self.k_rule,
            "z_probes": None if self.z_probes is None
            else [[z.real, z.imag] for z in self.z_probes],
            "n_probes": self.n_probes,
            "tube_r": self.tube_r,
            "rel_tol": self.rel_tol,
            "eps_tilde_factor": self.eps_tilde_factor,
            "real_potentials": self.real_potentials,
            "require_symmetry": self.require_symmetry,
            "vol_n_x": self.vol_n_x,
            "vol_n_xi": self.vol_n_xi,
            "omega_clearance": self.omega_clearance,
        }


def _region_probe_mesh(region: Region, n: int = 64) -> np.ndarray:
    if isinstance(region, (Rectangle, Disk)):
        return region.boundary_points(n)
    return region.base.boundary_points(n)


@dataclass(frozen=True)
class ValidationInfo:
    xi_bound: float
    warnings: tuple[str, ...]


def validate_config(config: ExperimentConfig) -> ValidationInfo:
    """Structural checks before any trial runs.

    Hard requirements: ellipticity, evenness for Weyl runs, the region inside
    the declared window Omega, and Omega escaping the sampled symbol range
    somewhere.  The soft 2r clearance of the region from the sampled range
    boundary is reported as a warning, not an error.
    """
    holds, _ = check_ellipticity(config.spec)
    if not holds:
        raise InvalidConfigError("symbol fails the classical ellipticity test")
    if config.require_symmetry and not check_symmetry(config.spec):
        raise InvalidConfigError(
            "symbol is not even in xi; Weyl counting runs require symmetry"
        )
    if isinstance(config.region, BoundaryTube):
        raise InvalidConfigError(
            "the counting region must be a rectangle or a disk; boundary "
            "tubes only enter the error-budget ingredients"
        )
    warnings: list[str] = []
    probe = BoundaryTube(config.region, 2.0 * config.tube_r)
    xi_bound = certified_xi_bound(config.spec, probe)
    grid = PhaseGrid(n_x=config.vol_n_x, xi_lo=-xi_bound, xi_hi=xi_bound,
                     n_xi=config.vol_n_xi)

    mesh = _region_probe_mesh(config.region, 64)
    if not bool(np.all(config.omega.contains(mesh))):
        raise InvalidConfigError("region is not contained in the declared Omega")

    samples = range_samples(config.spec, grid)
    omega_mesh = _region_probe_mesh(config.omega, 128)
    dist = distance_to_samples(samples, omega_mesh)
    if float(np.max(dist)) <= config.omega_clearance:
        raise InvalidConfigError(
            "Omega appears to be contained in the sampled symbol range; "
            "it must escape the range somewhere"
        )

    tube_mesh = _region_probe_mesh(config.region, 64)
    offsets = tube_mesh + 2.0 * config.tube_r * np.exp(
        1j * TWO_PI * np.arange(8) / 8.0
    )[:, None]
    tube_dist = distance_to_samples(samples, offsets.ravel())
    if float(np.max(tube_dist)) > config.omega_clearance:
        warnings.append(
            "region is within 2r of the sampled range boundary; the tube "
            "volume term in the count bound may be inflated"
        )
    return ValidationInfo(xi_bound=xi_bound, warnings=tuple(warnings))


def default_z_probes(region: Region, n: int) -> tuple[complex, ...]:
    base = region.base if isinstance(region, BoundaryTube) else region
    return tuple(complex(z) for z in base.boundary_points(n))


# ---------------------------------------------------------------------------
# predictions and trials
# ---------------------------------------------------------------------------

def weyl_prediction(spec: SymbolSpec, region: Region, h: float,
                    grid: PhaseGrid) -> float:
    """vol(p^{-1}(region)) / (2 pi h)."""
    return volume_preimage(spec, region, grid) / (TWO_PI * h)


@dataclass(frozen=True)
class TrialResult:
    seed: int | None
    count: int
    prediction: float
    relative_error: float
    sigma_min_probes: tuple[float, ...]
    logdet_probes: tuple[float | None, ...]
    runtime_s: float
    error: str | None = None
    eigvals: np.ndarray | None = None

    def as_dict(self) -> dict:
        # runtime and raw eigenvalues stay out: report files must be a pure
        # function of the configuration
        rel = self.relative_error if math.isfinite(self.relative_error) else None
        return {
            "seed": self.seed,
            "count": self.count,
            "prediction": self.prediction,
            "relative_error": rel,
            "sigma_min_probes": list(self.sigma_min_probes),
            "logdet_probes": list(self.logdet_probes),
            "error": self.error,
        }


@dataclass(frozen=True)
class _TrialContext:
    config: ExperimentConfig
    h: float
    grid: GridParams
    P: OperatorMatrix
    plan: PerturbationPlan
    prediction: float
    z_probes: tuple[complex, ...]


def _grid_for_h(config: ExperimentConfig, h: float, xi_bound: float) -> GridParams:
    if config.k_rule == "auto":
        K = int(math.ceil(1.5 * xi_bound / h))
    else:
        K = int(config.k_rule)
    return GridParams(h=h, K=K)


def _context_for_h(config: ExperimentConfig, h: float,
                   info: ValidationInfo) -> _TrialContext:
    grid = _grid_for_h(config, h, info.xi_bound)
    P = assemble_differential(config.spec, grid)
    plan = derive_params(
        n=1,
        s=config.s,
        epsilon=config.epsilon,
        kappa=config.resolved_kappa(),
        h=h,
        tau0=config.tau0,
        mode=config.mode,
        delta_eff=config.delta_eff,
        l_cap=h * grid.K,
    )
    vol_grid = PhaseGrid(n_x=config.vol_n_x, xi_lo=-info.xi_bound,
                         xi_hi=info.xi_bound, n_xi=config.vol_n_xi)
    prediction = weyl_prediction(config.spec, config.region, h, vol_grid)
    probes = (config.z_probes if config.z_probes is not None
              else default_z_probes(config.region, config.n_probes))
    return _TrialContext(
        config=config, h=h, grid=grid, P=P, plan=plan,
        prediction=prediction, z_probes=probes,
    )


def _relative_error(count: int, prediction: float) -> float:
    if prediction > 0.0:
        return abs(count - prediction) / prediction
    return 0.0 if count == 0 else math.inf


def _probe_diagnostics(matrix: OperatorMatrix, z_probes):
    sig, logd = [], []
    for z in z_probes:
        sig.append(float(singular_values(matrix, z)[0]))
        try:
            logd.append(log_abs_det(matrix, z))
        except SingularMatrixError:
            logd.append(None)
    return tuple(sig), tuple(logd)


def _run_trial_in_context(ctx: _TrialContext, trial_index: int) -> TrialResult:
    t0 = time.perf_counter()
    seed = split_seed(ctx.config.master_seed, trial_index)
    try:
        pot = sample_potential(ctx.plan, seed,
                               real_mode=ctx.config.real_potentials)
        perturbed = build_perturbed(ctx.P, ctx.plan, pot)
        spectrum = eigenvalues(perturbed)
        count = count_in_region(spectrum, ctx.config.region)
        sig, logd = _probe_diagnostics(perturbed, ctx.z_probes)
        return TrialResult(
            seed=seed,
            count=count,
            prediction=ctx.prediction,
            relative_error=_relative_error(count, ctx.prediction),
            sigma_min_probes=sig,
            logdet_probes=logd,
            runtime_s=time.perf_counter() - t0,
            eigvals=spectrum.eigenvalues,
        )
    except Exception as exc:  # a failed trial is recorded, never dropped
        return TrialResult(
            seed=seed, count=-1, prediction=ctx.prediction,
            relative_error=math.nan, sigma_min_probes=(), logdet_probes=(),
            runtime_s=time.perf_counter() - t0,
            error=f"{type(exc).__name__}: {exc}",
        )


def _baseline_trial(ctx: _TrialContext) -> TrialResult:
    """Unperturbed operator, run first: isolates truncation artifacts."""
    t0 = time.perf_counter()
    spectrum = eigenvalues(ctx.P)
    count = count_in_region(spectrum, ctx.config.region)
    sig, logd = _probe_diagnostics(ctx.P, ctx.z_probes)
    return TrialResult(
        seed=None,
        count=count,
        prediction=ctx.prediction,
        relative_error=_relative_error(count, ctx.prediction),
        sigma_min_probes=sig,
        logdet_probes=logd,
        runtime_s=time.perf_counter() - t0,
        eigvals=spectrum.eigenvalues,
    )


def run_trial(config: ExperimentConfig, h: float, trial_index: int) -> TrialResult:
    """One seeded trial, deterministic in (config, h, trial_index)."""
    info = validate_config(config)
    ctx = _context_for_h(config, h, info)
    return _run_trial_in_context(ctx, trial_index)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HRecord:
    h: float
    K: int
    matrix_dim: int
    prediction: float
    plan: PerturbationPlan
    baseline: TrialResult
    trials: tuple[TrialResult, ...]
    eps0: float
    eps_tilde: float
    tube_volume: float
    rel_err_quartiles: tuple[float, float, float]
    success_fraction_rel: float
    success_fraction_bound: float | None

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "K": self.K,
            "matrix_dim": self.matrix_dim,
            "prediction": self.prediction,
            "plan": self.plan.as_dict(),
            "baseline": self.baseline.as_dict(),
            "trials": [t.as_dict() for t in self.trials],
            "eps0": self.eps0,
            "eps_tilde": self.eps_tilde,
            "tube_volume": self.tube_volume,
            "rel_err_quartiles": [
                q if math.isfinite(q) else None for q in self.rel_err_quartiles
            ],
            "success_fraction_rel": self.success_fraction_rel,
            "success_fraction_bound": self.success_fraction_bound,
        }


@dataclass(frozen=True)
class WeylReport:
    config: ExperimentConfig
    per_h: tuple[HRecord, ...]
    c_fit: float
    validation_warnings: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "schema": "torweyl.report.v1",
            "config": self.config.as_dict(),
            "per_h": [rec.as_dict() for rec in self.per_h],
            "c_fit": self.c_fit,
            "validation_warnings": list(self.validation_warnings),
        }


def _quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    arr = np.asarray([v for v in values if math.isfinite(v)], dtype=float)
    if arr.size == 0:
        return (math.nan, math.nan, math.nan)
    q1, q2, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return (float(q1), float(q2), float(q3))


def _bound_rhs(c: float, h: float, eps_tilde: float, r: float,
               tube_volume: float) -> float:
    """Count-error budget (C/h) (eps_tilde/r + C (r + ln(1/r) tube_volume))."""
    return (c / h) * (eps_tilde / r + c * (r + math.log(1.0 / r) * tube_volume))


def _fit_constant(worst: float, h: float, eps_tilde: float, r: float,
                  tube_volume: float) -> float:
    """Smallest C >= 0 with worst <= (C/h)(eps_tilde/r + C(...))."""
    if worst <= 0.0:
        return 0.0
    g1 = eps_tilde / (r * h)
    g2 = (r + math.log(1.0 / r) * tube_volume) / h
    if g2 <= 0.0:
        return worst / g1
    return (-g1 + math.sqrt(g1 * g1 + 4.0 * g2 * worst)) / (2.0 * g2)


def run_ensemble(config: ExperimentConfig, workers: int = 1) -> WeylReport:
    """Full Monte Carlo report over the configured h list.

    Trials are independent tasks keyed by (h, trial index) and folded in
    index order, so the report is a pure function of the configuration for
    any worker count.
    """
    if config.n_trials < 1:
        raise InvalidConfigError("n_trials must be at least 1")
    info = validate_config(config)
    records: list[HRecord] = []
    raw: list[tuple[_TrialContext, TrialResult, list[TrialResult]]] = []
    for h in config.h_list:
        ctx = _context_for_h(config, h, info)
        baseline = _baseline_trial(ctx)
        indices = list(range(config.n_trials))
        if workers > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
                trials = list(pool.map(
                    lambda i: _run_trial_in_context(ctx, i), indices))
        else:
            trials = [_run_trial_in_context(ctx, i) for i in indices]
        raw.append((ctx, baseline, trials))

    # ingredients recomputed per h; the constant is fit at the largest h
    # and reported, never assumed
    vol_grid = PhaseGrid(n_x=config.vol_n_x, xi_lo=-info.xi_bound,
                         xi_hi=info.xi_bound, n_xi=config.vol_n_xi)
    h_max = max(config.h_list)
    c_fit = 0.0
    tube_vols: dict[float, float] = {}
    for ctx, baseline, trials in raw:
        tube = BoundaryTube(config.region, config.tube_r)
        tube_vols[ctx.h] = volume_preimage(config.spec, tube, vol_grid)
    for ctx, baseline, trials in raw:
        if ctx.h == h_max:
            worst = max(
                (abs(t.count - ctx.prediction) for t in trials if t.error is None),
                default=0.0,
            )
            eps_tilde = config.eps_tilde_factor * ctx.plan.eps0
            c_fit = _fit_constant(worst, ctx.h, eps_tilde, config.tube_r,
                                  tube_vols[ctx.h])
    for ctx, baseline, trials in raw:
        eps_tilde = config.eps_tilde_factor * ctx.plan.eps0
        tau_tol = (_bound_rhs(c_fit, ctx.h, eps_tilde, config.tube_r,
                              tube_vols[ctx.h]) if c_fit > 0.0 else None)
        ok = [t for t in trials if t.error is None]
        frac_rel = (sum(1 for t in ok if t.relative_error <= config.rel_tol)
                    / len(ok)) if ok else 0.0
        frac_bound = None
        if tau_tol is not None and ok:
            frac_bound = sum(
                1 for t in ok if abs(t.count - ctx.prediction) <= tau_tol
            ) / len(ok)
        records.append(HRecord(
            h=ctx.h,
            K=ctx.grid.K,
            matrix_dim=ctx.grid.N,
            prediction=ctx.prediction,
            plan=ctx.plan,
            baseline=baseline,
            trials=tuple(trials),
            eps0=ctx.plan.eps0,
            eps_tilde=eps_tilde,
            tube_volume=tube_vols[ctx.h],
            rel_err_quartiles=_quartiles([t.relative_error for t in ok]),
            success_fraction_rel=frac_rel,
            success_fraction_bound=frac_bound,
        ))
    return WeylReport(
        config=config,
        per_h=tuple(records),
        c_fit=c_fit,
        validation_warnings=info.warnings,
    )


# ---------------------------------------------------------------------------
# the hD + g line model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LineModelResult:
    lambdas: np.ndarray
    residuals: np.ndarray
    line_im: float
    max_line_deviation: float
    tail_ratio: float


def _antiderivative(g: TrigPoly) -> TrigPoly:
    """Periodic primitive of g - <g>."""
    return TrigPoly({k: c / (1j * k) for k, c in g.coeffs.items() if k != 0})


def line_spectrum(g: TrigPoly, h: float, k_lo: int, k_hi: int) -> np.ndarray:
    """Exact eigenvalues <g> + h k of hD + g for k in [k_lo, k_hi]."""
    ks = np.arange(k_lo, k_hi + 1)
    return g.mean() + h * ks


def line_count_in_region(g: TrigPoly, h: float, region: Region) -> int:
    """Count of the closed-form spectrum inside the region."""
    mean = complex(g.mean())
    base = region.base if isinstance(region, BoundaryTube) else region
    pad = region.r if isinstance(region, BoundaryTube) else 0.0
    if isinstance(base, Rectangle):
        lo, hi = base.re_lo - pad, base.re_hi + pad
    else:
        lo = base.center.real - base.radius - pad
        hi = base.center.real + base.radius + pad
    k_lo = int(math.floor((lo - mean.real) / h)) - 1
    k_hi = int(math.ceil((hi - mean.real) / h)) + 1
    lam = line_spectrum(g, h, k_lo, k_hi)
    return int(np.count_nonzero(region.contains(lam)))


def line_model_check(g: TrigPoly, h: float, k_max: int, grid: GridParams,
                     tail_tol: float = 1e-10) -> LineModelResult:
    """Quasimode residuals for P = hD + Conv(g) on the truncation.

    The analytic eigenfunctions u_k = exp(ikx - (i/h) G0(x)) with G0' = g - <g>
    are expanded in Fourier modes by FFT, truncated to the grid, and the
    relative residual of (P - lambda_k) u_k is returned for |k| <= k_max,
    lambda_k = <g> + h k.  The Fourier tail dropped by the truncation is
    measured first; an unresolvable tail raises ResolutionError.
    """
    if g.bandwidth > 2 * grid.K:
        raise ResolutionError("g exceeds the representable bandwidth")
    mean = complex(g.mean())
    G0 = _antiderivative(g)
    n_fft = 1
    while n_fft < max(8 * (grid.K + 1), 256):
        n_fft *= 2
    x = np.arange(n_fft) * (TWO_PI / n_fft)
    v = np.exp(-1j / h * G0(x))
    coeffs = np.fft.fft(v) / n_fft          # coeffs[n % n_fft] of e^{inx}
    freqs = np.fft.fftfreq(n_fft, d=1.0 / n_fft).astype(int)
    total = float(np.sum(np.abs(coeffs) ** 2))
    keep = np.abs(freqs) <= grid.K - k_max
    outside = float(np.sum(np.abs(coeffs[~keep]) ** 2))
    tail_ratio = math.sqrt(outside / total)
    if tail_ratio > tail_tol:
        raise ResolutionError(
            f"Fourier tail ratio {tail_ratio:.3e} exceeds {tail_tol:g}; "
            f"increase K beyond {grid.K}"
        )

    spec = SymbolSpec(m=1, a=(g, TrigPoly.constant(1.0)))
    P = assemble_differential(spec, grid).entries
    kvals = grid.k_values()
    lookup = {int(n): c for n, c in zip(freqs, coeffs)}
    ks = np.arange(-k_max, k_max + 1)
    lambdas = mean + h * ks
    residuals = np.empty(ks.shape, dtype=float)
    for i, k in enumerate(ks):
        u = np.array([lookup.get(int(j - k), 0j) for j in kvals])
        norm = float(np.linalg.norm(u))
        res = P @ u - lambdas[i] * u
        residuals[i] = float(np.linalg.norm(res)) / norm
    line_im = mean.imag
    max_dev = float(np.max(np.abs(lambdas.imag - line_im)))
    return LineModelResult(
        lambdas=lambdas,
        residuals=residuals,
        line_im=line_im,
        max_line_deviation=max_dev,
        tail_ratio=tail_ratio,
    )


# ---------------------------------------------------------------------------
# singular-value ladder diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LadderRung:
    k: int
    nu_lo: int
    nu_hi: int
    threshold: float
    observed_min: float
    passed: bool


@dataclass(frozen=True)
class LadderProfile:
    singular: np.ndarray
    n0: int
    rungs: tuple[LadderRung, ...]
    vacuous: bool


def ladder_sizes(n0: int, theta: float, n_theta: int) -> list[int]:
    """Index ladder: multiply by (1 - theta) while >= n_theta, then step by 1."""
    if not (0.0 < theta <= 0.25):
        raise ValueError("theta must lie in (0, 1/4]")
    if n_theta < 2:
        raise ValueError("n_theta must be at least 2")
    sizes = [n0]
    cur = n0
    while cur >= n_theta:
        cur = int(math.floor((1.0 - theta) * cur))
        sizes.append(cur)
        if cur <= 1:
            return sizes
    while cur > 1:
        cur -= 1
        sizes.append(cur)
    return sizes


def singular_ladder_profile(op, z: complex, plan: PerturbationPlan | None,
                            theta: float = 0.2, n_theta: int = 4) -> LadderProfile:
    """Observed singular-value ladder of (M - z) against the rung thresholds.

    With no plan (or zero perturbation weight) the profile is just the raw
    sorted singular values; nothing is asserted.  Otherwise rung k covers
    indices (N^(k), N^(k-1)] with threshold tau0 h^{k N2}; the pass flag uses
    the effective exponent form so that configured weights grade
    on the scale actually applied.
    """
    t = singular_values(op, z)
    if plan is None or plan.delta == 0.0:
        return LadderProfile(singular=t, n0=0, rungs=(), vacuous=True)
    tau0 = plan.tau0
    n0 = int(np.count_nonzero(t < tau0))
    if n0 == 0:
        return LadderProfile(singular=t, n0=0, rungs=(), vacuous=True)
    sizes = ladder_sizes(n0, theta, n_theta)
    h = plan.h
    n2 = plan.ladder_exponent()
    slack = 1.0 - h ** (plan.n1_effective() + plan.n)
    rungs: list[LadderRung] = []
    for k in range(1, len(sizes)):
        lo, hi = sizes[k], sizes[k - 1]
        if hi <= lo:
            continue
        observed = float(np.min(t[lo:hi]))
        threshold = tau0 * h ** (k * n2)
        rungs.append(LadderRung(
            k=k, nu_lo=lo + 1, nu_hi=hi, threshold=threshold,
            observed_min=observed, passed=bool(observed >= slack * threshold),
        ))
    k_last = len(sizes)
    threshold = tau0 * h ** (k_last * n2)
    rungs.append(LadderRung(
        k=k_last, nu_lo=1, nu_hi=1, threshold=threshold,
        observed_min=float(t[0]), passed=bool(t[0] >= slack * threshold),
    ))
    return LadderProfile(singular=t, n0=n0, rungs=tuple(rungs), vacuous=False)


# ---------------------------------------------------------------------------
# trace and log-determinant quadrature comparisons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormulaGap:
    h: float
    alpha: float
    operator_value: float
    quadrature_value: float
    gap: float


def _pz_square(spec: SymbolSpec, ptilde, z: complex, grid: GridParams):
    """S = A* A with A the discrete (Ptilde - z)^{-1} (P - z)."""
    P = assemble_differential(spec, grid).entries
    Pt = assemble_toroidal_pdo(ptilde, grid).entries
    eye = np.eye(grid.N)
    A = np.linalg.solve(Pt - z * eye, P - z * eye)
    S = A.conj().T @ A
    return 0.5 * (S + S.conj().T)


def _mode_aligned_quadrature(spec: SymbolSpec, ptilde, z: complex,
                             grid: GridParams, n_x: int | None = None):
    """Values of s = |p - z|^2 / |ptilde - z|^2 on the x-grid times the modes.

    The xi nodes sit exactly at h k, i.e. at the midpoints of the cells
    [h(k - 1/2), h(k + 1/2)], so (2 pi h)^{-1} * sum * cell = mean over x of
    the mode sum.
    """
    if n_x is None:
        n_x = 4 * grid.K + 4
    x = np.arange(n_x) * (TWO_PI / n_x)
    xi = grid.h * grid.k_values()
    p = spec.eval_principal(x[:, None], xi[None, :])
    pt = np.asarray(ptilde(x[:, None], xi[None, :]), dtype=complex)
    s = np.abs(p - z) ** 2 / np.abs(pt - z) ** 2
    return s, n_x


def trace_formula_gap(spec: SymbolSpec, ptilde, z: complex, alpha: float,
                      grid: GridParams, chi: BumpFunction) -> FormulaGap:
    """tr chi(S/alpha) against (2 pi h)^{-1} iint chi(s/alpha) dx dxi."""
    S = _pz_square(spec, ptilde, z, grid)
    lam = np.linalg.eigvalsh(S)
    trace_val = float(np.sum(chi(lam / alpha)))
    s, n_x = _mode_aligned_quadrature(spec, ptilde, z, grid)
    quad = float(np.sum(chi(s / alpha))) / n_x
    return FormulaGap(h=grid.h, alpha=alpha, operator_value=trace_val,
                      quadrature_value=quad, gap=abs(trace_val - quad))


def logdet_formula_gap(spec: SymbolSpec, ptilde, z: complex, alpha: float,
                       grid: GridParams, chi: BumpFunction) -> FormulaGap:
    """ln det(S + alpha chi(S/alpha)) against (2 pi h)^{-1} iint ln s dx dxi."""
    S = _pz_square(spec, ptilde, z, grid)
    lam = np.linalg.eigvalsh(S)
    logdet = float(np.sum(np.log(lam + alpha * chi(lam / alpha))))
    s, n_x = _mode_aligned_quadrature(spec, ptilde, z, grid)
    if np.any(s == 0.0):
        raise ValueError("quadrature node hits p(x, xi) = z exactly; move z")
    quad = float(np.sum(np.log(s))) / n_x
    return FormulaGap(h=grid.h, alpha=alpha, operator_value=logdet,
                      quadrature_value=quad, gap=abs(logdet - quad))


def _matrix_guard_ok(spec: SymbolSpec, candidate, test_points, grid: GridParams,
                     matrix_guard: float) -> bool:
    pt = assemble_toroidal_pdo(candidate, grid).entries
    eye = np.eye(grid.N)
    for z in test_points:
        smallest = float(np.linalg.svd(pt - z * eye, compute_uv=False)[-1])
        if smallest < matrix_guard:
            return False
    return True


def shifted_symbol_for(spec: SymbolSpec, z_center: complex,
                       test_points: Sequence[complex], h: float,
                       xi_bound: float, guard: float = 0.1,
                       matrix_guard: float = 0.02):
    """Guard-validated shifted symbol on a mode-aligned slab.

    Candidates must keep the symbol at least ``guard`` away from every test
    point on the sampled grid and keep the quantized shifted operator at
    least ``matrix_guard`` from singular there.  The second check matters:
    a bump in the symbol's values can leave x -> p(x, xi) winding around a
    test point, and then the quantization is exponentially near-singular
    even though the symbol clears the pointwise guard.  Value bumps are
    tried first, then whole-window frequency lifts, which cannot wind.
    """
    K = int(math.ceil(1.5 * xi_bound / h))
    grid = GridParams(h=h, K=K)
    phase = PhaseGrid(n_x=4 * K + 4, xi_lo=-(h * (K + 0.5)),
                      xi_hi=h * (K + 0.5), n_xi=grid.N)
    pts = [complex(z) for z in test_points]
    try:
        ptilde, shift, rho = find_shifted_symbol(
            spec, z_center, pts, phase, guard=guard)
        if _matrix_guard_ok(spec, ptilde, pts, grid, matrix_guard):
            return ptilde, grid, ("value-bump", shift, rho)
    except GuardError:
        pass

    x = phase.x_nodes()
    xi = phase.xi_nodes()
    p_samples = spec.eval_principal(x[:, None], xi[None, :]).ravel()
    span = max(abs(z - z_center) for z in pts) if pts else 0.0
    top = max(z.imag for z in pts)
    for xi_margin in (0.2, 0.5, 0.8):
        xi_on = min(_winding_xi_bound(spec, pts) + xi_margin, xi_bound - 0.05)
        xi_off = xi_on + 0.3
        for shift in (top + 1.5 + span, top + 3.0 + span, top + 6.0 + span):
            candidate = make_lifted_symbol(spec, shift, xi_on, xi_off)
            moved = np.asarray(candidate(x[:, None], xi[None, :])).ravel()
            clear = min(float(np.min(np.abs(moved - z))) for z in pts)
            if clear < guard:
                continue
            if _matrix_guard_ok(spec, candidate, pts, grid, matrix_guard):
                return candidate, grid, ("xi-lift", shift, xi_on)
    raise GuardError(
        "no shifted symbol in either search family cleared the symbol and "
        "matrix guards"
    )


def _winding_xi_bound(spec: SymbolSpec, test_points) -> float:
    """Largest |xi| whose x-row could pass near a test point (by the l1
    spread of the x-dependent coefficients around the xi-monomial part)."""
    spread = sum(poly.sup_bound() for a, poly in enumerate(spec.a)
                 if poly.bandwidth > 0 or a < spec.m)
    worst = max((abs(z) for z in test_points), default=0.0) + spread
    if spec.m == 0:
        return 0.0
    return worst ** (1.0 / spec.m)
