"""Experiment orchestration tests: trials, ensembles, line model, ladders."""

import math

import numpy as np
import pytest

from torweyl.experiments import (
    ExperimentConfig,
    InvalidConfigError,
    ResolutionError,
    default_z_probes,
    ladder_sizes,
    line_count_in_region,
    line_model_check,
    line_spectrum,
    logdet_formula_gap,
    run_ensemble,
    run_trial,
    shifted_symbol_for,
    singular_ladder_profile,
    trace_formula_gap,
    validate_config,
    weyl_prediction,
)
from torweyl.operators import GridParams, assemble_differential
from torweyl.perturbation import build_perturbed, derive_params, sample_potential
from torweyl.serialize import json_text
from torweyl.spectral import BumpFunction, singular_values
from torweyl.symbols import (
    Disk,
    PhaseGrid,
    Rectangle,
    TrigPoly,
    catalog_symbol,
    certified_xi_bound,
)

TWO_PI = 2.0 * math.pi


def small_config(**kw):
    args = dict(
        spec=catalog_symbol("xi2+exp(ix)"),
        region=Rectangle(0.2, 0.8, -0.4, 0.4),
        omega=Rectangle(-0.2, 1.4, -0.9, 1.3),
        h_list=(0.1,),
        n_trials=3,
        master_seed=5,
        delta_eff=1e-12,
        n_probes=2,
        vol_n_x=256,
        vol_n_xi=256,
    )
    args.update(kw)
    return ExperimentConfig(**args)


class TestWeylPrediction:
    def test_strip_model_reference_value(self):
        spec = catalog_symbol("xi+exp(-ix)")
        region = Rectangle(-1, 1, 0.1, 0.9)
        bound = certified_xi_bound(spec, region)
        grid = PhaseGrid(n_x=2048, xi_lo=-bound, xi_hi=bound, n_xi=2048)
        pred = weyl_prediction(spec, region, 0.01, grid)
        exact = 4.0 * (math.asin(0.9) - math.asin(0.1)) / (TWO_PI * 0.01)
        assert pred == pytest.approx(exact, rel=2e-3)
        assert pred == pytest.approx(64.91, rel=5e-3)

    def test_halving_h_doubles_exactly(self):
        spec = catalog_symbol("xi2+exp(ix)")
        region = Rectangle(0.2, 0.8, -0.4, 0.4)
        grid = PhaseGrid(n_x=128, xi_lo=-1.5, xi_hi=1.5, n_xi=128)
        assert weyl_prediction(spec, region, 0.02, grid) == pytest.approx(
            2.0 * weyl_prediction(spec, region, 0.04, grid), rel=0.0)

    def test_empty_region(self):
        spec = catalog_symbol("xi2+exp(ix)")
        region = Rectangle(10.0, 11.0, 10.0, 11.0)
        grid = PhaseGrid(n_x=64, xi_lo=-5.0, xi_hi=5.0, n_xi=64)
        assert weyl_prediction(spec, region, 0.05, grid) == 0.0


class TestConfigValidation:
    def test_symmetry_required_for_weyl_runs(self):
        with pytest.raises(InvalidConfigError, match="even"):
            validate_config(small_config(spec=catalog_symbol("xi+exp(-ix)")))

    def test_region_must_sit_inside_omega(self):
        with pytest.raises(InvalidConfigError, match="Omega"):
            validate_config(small_config(omega=Rectangle(0.3, 0.6, -0.1, 0.1)))

    def test_omega_must_escape_symbol_range(self):
        with pytest.raises(InvalidConfigError, match="escape"):
            validate_config(small_config(omega=Rectangle(0.1, 1.0, -0.5, 0.5)))

    def test_tube_counting_region_rejected(self):
        from torweyl.symbols import BoundaryTube

        tube = BoundaryTube(Rectangle(0.2, 0.8, -0.4, 0.4), 0.05)
        with pytest.raises(InvalidConfigError, match="rectangle or a disk"):
            validate_config(small_config(region=tube))

    def test_close_boundary_flagged_as_warning(self):
        cfg = small_config(region=Rectangle(0.2, 0.8, -0.97, 0.97),
                           omega=Rectangle(-0.3, 1.5, -1.4, 1.4))
        info = validate_config(cfg)
        assert any("tube" in w for w in info.warnings)

    def test_default_probes_on_boundary(self):
        region = Rectangle(0.0, 1.0, 0.0, 1.0)
        probes = default_z_probes(region, 5)
        assert len(probes) == 5
        assert np.allclose(region.boundary_distance(np.array(probes)), 0.0,
                           atol=1e-12)


class TestRunTrial:
    def test_deterministic(self):
        cfg = small_config()
        a = run_trial(cfg, 0.1, 2)
        b = run_trial(cfg, 0.1, 2)
        assert a.as_dict() == b.as_dict()
        assert np.array_equal(a.eigvals, b.eigvals)

    def test_zero_delta_reproduces_baseline_count(self):
        cfg = small_config(delta_eff=0.0, n_trials=1)
        rep = run_ensemble(cfg)
        rec = rep.per_h[0]
        assert rec.trials[0].count == rec.baseline.count

    def test_failed_trial_recorded_not_dropped(self, monkeypatch):
        import torweyl.experiments as exp

        real_sample = exp.sample_potential
        boom_seed = {}

        def flaky(plan, seed, real_mode=False):
            if not boom_seed:
                boom_seed["seed"] = seed
                raise RuntimeError("injected draw failure")
            return real_sample(plan, seed, real_mode=real_mode)

        monkeypatch.setattr(exp, "sample_potential", flaky)
        rep = run_ensemble(small_config(n_trials=3))
        rec = rep.per_h[0]
        assert len(rec.trials) == 3
        failed = [t for t in rec.trials if t.error is not None]
        assert len(failed) == 1
        assert "injected draw failure" in failed[0].error
        assert failed[0].as_dict()["relative_error"] is None
        healthy = [t for t in rec.trials if t.error is None]
        assert all(t.count >= 0 for t in healthy)


class TestRunEnsemble:
    def test_single_trial_reduces_to_run_trial(self):
        cfg = small_config(n_trials=1)
        rep = run_ensemble(cfg)
        direct = run_trial(cfg, 0.1, 0)
        assert rep.per_h[0].trials[0].as_dict() == direct.as_dict()

    def test_success_fraction_monotone_in_tolerance(self):
        cfg = small_config(n_trials=4)
        rep = run_ensemble(cfg)
        errs = [t.relative_error for t in rep.per_h[0].trials]
        fracs = [np.mean([e <= tol for e in errs])
                 for tol in (0.05, 0.1, 0.2, 0.5, 1.0, 10.0)]
        assert all(a <= b for a, b in zip(fracs, fracs[1:]))

    def test_report_identical_across_worker_counts(self):
        cfg = small_config(n_trials=4)
        solo = json_text(run_ensemble(cfg, workers=1).as_dict())
        pooled = json_text(run_ensemble(cfg, workers=4).as_dict())
        assert solo == pooled

    def test_ingredients_present(self):
        rep = run_ensemble(small_config(n_trials=2))
        rec = rep.per_h[0]
        assert rec.eps0 > 0 and rec.eps_tilde == pytest.approx(10.0 * rec.eps0)
        assert rec.tube_volume > 0
        assert rep.c_fit >= 0.0

    def test_trials_csv_layout(self):
        from torweyl.serialize import trials_csv

        rep = run_ensemble(small_config(n_trials=2))
        lines = trials_csv(rep.as_dict()).splitlines()
        assert lines[0] == "schema=torweyl.trials.v1"
        assert lines[1].split(",") == ["h", "trial", "seed", "count",
                                       "prediction", "relative_error", "error"]
        # baseline row plus one row per trial, for each h
        assert len(lines) == 2 + len(rep.per_h) * (1 + 2)
        assert lines[2].split(",")[1] == "baseline"


class TestLineModel:
    def test_free_transport_exact(self):
        res = line_model_check(TrigPoly.zero(), 0.1, 3, GridParams(h=0.1, K=16))
        assert np.array_equal(res.residuals, np.zeros(7))
        assert np.allclose(res.lambdas, 0.1 * np.arange(-3, 4), atol=0.0)
        assert res.max_line_deviation == 0.0

    def test_wave_coefficient_quasimodes(self):
        res = line_model_check(TrigPoly.wave(-1), 0.1, 5,
                               GridParams(h=0.1, K=96))
        assert np.max(res.residuals) <= 1e-8
        assert res.tail_ratio <= 1e-10
        assert res.line_im == 0.0

    def test_perturbation_shifts_line_without_spreading(self):
        g = TrigPoly.wave(-1)
        q = TrigPoly({0: 0.5 + 2.0j, 1: 0.3, -1: 0.1j})
        delta = 1e-3
        res = line_model_check(g + q.scaled(delta), 0.1, 3,
                               GridParams(h=0.1, K=96))
        assert res.line_im == pytest.approx(delta * 2.0)
        assert res.max_line_deviation == 0.0
        assert np.max(res.residuals) <= 1e-8

    def test_unresolvable_tail_raises(self):
        with pytest.raises(ResolutionError, match="increase K"):
            line_model_check(TrigPoly.wave(-1), 0.1, 3, GridParams(h=0.1, K=12))

    def test_counts_off_the_line_vanish(self):
        g = TrigPoly.wave(-1)
        for region in (Rectangle(-0.33, 0.33, 0.15, 0.7),
                       Rectangle(-0.33, 0.33, -0.7, -0.15),
                       Disk(0.0 + 0.5j, 0.35)):
            assert line_count_in_region(g, 0.1, region) == 0

    def test_counts_on_the_line(self):
        lam = line_spectrum(TrigPoly.zero(), 0.1, -3, 3)
        assert np.allclose(lam, 0.1 * np.arange(-3, 4))
        assert line_count_in_region(TrigPoly.zero(), 0.1,
                                    Rectangle(-0.33, 0.33, -0.1, 0.1)) == 7


class TestLadder:
    def test_reference_recursion(self):
        assert ladder_sizes(16, 0.25, 4) == [16, 12, 9, 6, 4, 3, 2, 1]

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            ladder_sizes(16, 0.3, 4)
        with pytest.raises(ValueError):
            ladder_sizes(16, 0.2, 1)

    def test_unperturbed_profile_is_raw(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
        prof = singular_ladder_profile(a, 0.0, None)
        assert prof.vacuous and prof.rungs == ()
        assert np.array_equal(prof.singular, singular_values(a, 0.0))

    def test_vacuous_when_no_small_values(self):
        plan = derive_params(n=1, s=2, epsilon=0.5, kappa=0.25, h=0.1,
                             mode="effective", delta_eff=1e-12, l_cap=1.2,
                             tau0=1e-8)
        a = np.eye(6, dtype=complex) * 5.0
        prof = singular_ladder_profile(a, 0.0, plan)
        assert prof.vacuous

    def test_rungs_cover_index_range(self):
        spec = catalog_symbol("xi2+exp(ix)")
        grid = GridParams(h=0.05, K=45)
        plan = derive_params(n=1, s=2, epsilon=0.5, kappa=0.25, h=0.05,
                             mode="effective", delta_eff=1e-12,
                             l_cap=0.05 * 45)
        P = assemble_differential(spec, grid)
        pot = sample_potential(plan, 3)
        pd = build_perturbed(P, plan, pot)
        prof = singular_ladder_profile(pd, 0.4 + 0.1j, plan, theta=0.2,
                                       n_theta=4)
        if not prof.vacuous:
            covered = sorted(nu for r in prof.rungs
                             for nu in range(r.nu_lo, r.nu_hi + 1))
            assert covered == list(range(1, prof.n0 + 1))

    def test_perturbation_lifts_smallest_singular_value(self):
        # the spectral floor rises under a random multiplicative bump for
        # most draws; observed fraction recorded against the 90% mark
        spec = catalog_symbol("xi2+exp(ix)")
        h = 0.05
        grid = GridParams(h=h, K=45)
        plan = derive_params(n=1, s=2, epsilon=0.5, kappa=0.25, h=h,
                             mode="effective", delta_eff=1e-12, l_cap=h * 45)
        P = assemble_differential(spec, grid)
        z = 0.4 + 0.1j
        t1_base = singular_values(P, z)[0]
        wins = 0
        trials = 50
        for i in range(trials):
            pot = sample_potential(plan, 1000 + i)
            pd = build_perturbed(P, plan, pot)
            if singular_values(pd, z)[0] >= t1_base:
                wins += 1
        assert wins >= int(0.9 * trials)


class TestMedianRegression:
    def test_interior_rectangle_median_at_h002(self):
        # calibration regression: this interior rectangle tracks the count
        # prediction to median relative error ~0.11 at h = 0.02
        cfg = ExperimentConfig(
            spec=catalog_symbol("xi2+exp(ix)"),
            region=Rectangle(0.05, 0.95, -0.45, 0.45),
            omega=Rectangle(-0.2, 1.4, -0.9, 1.3),
            h_list=(0.02,),
            n_trials=20,
            master_seed=2024,
            delta_eff=1e-12,
            n_probes=0,
            vol_n_x=1024,
            vol_n_xi=1024,
        )
        rep = run_ensemble(cfg)
        assert rep.per_h[0].rel_err_quartiles[1] <= 0.15


class TestLogdetBand:
    def test_trial_logdet_band_narrows_with_h(self):
        # per-trial ln|det(P_delta - z)| against the mode-aligned quadrature
        # of ln|p - z|: the relative band width at the smallest h stays
        # within the width at the largest h (endpoint trend only; the band
        # constants are not pinned by theory)
        spec = catalog_symbol("xi2+exp(ix)")
        z = 0.5 + 0.55j
        rel_widths = []
        for h in (0.1, 0.025):
            K = int(math.ceil(1.5 * 1.5 / h))
            grid = GridParams(h=h, K=K)
            P = assemble_differential(spec, grid)
            plan = derive_params(n=1, s=2, epsilon=0.5, kappa=0.25, h=h,
                                 mode="effective", delta_eff=1e-12,
                                 l_cap=h * K)
            n_x = 4 * K + 4
            x = np.arange(n_x) * (TWO_PI / n_x)
            xi = h * grid.k_values()
            p = spec.eval_principal(x[:, None], xi[None, :])
            quad = float(np.sum(np.log(np.abs(p - z)))) / n_x
            devs = []
            for i in range(5):
                from torweyl.perturbation import split_seed
                from torweyl.spectral import log_abs_det

                pot = sample_potential(plan, split_seed(31, i))
                pd = build_perturbed(P, plan, pot)
                devs.append(abs(log_abs_det(pd, z) - quad))
            rel_widths.append(max(devs) / abs(quad))
        assert rel_widths[1] <= rel_widths[0]


class TestFormulaGaps:
    def test_shifted_symbol_keeps_matrix_invertible(self):
        spec = catalog_symbol("xi2+exp(ix)")
        z = 0.5 + 0.3j
        xi_bound = certified_xi_bound(spec, Disk(z, 0.6))
        ptilde, grid, info = shifted_symbol_for(spec, z, [z], 0.05, xi_bound)
        from torweyl.operators import assemble_toroidal_pdo

        pt = assemble_toroidal_pdo(ptilde, grid).entries
        smallest = np.linalg.svd(pt - z * np.eye(grid.N),
                                 compute_uv=False)[-1]
        assert smallest >= 0.02

    def test_gap_records_are_consistent(self):
        spec = catalog_symbol("xi2+exp(ix)")
        z = 0.5 + 0.3j
        xi_bound = certified_xi_bound(spec, Disk(z, 0.6))
        chi = BumpFunction()
        ptilde, grid, _ = shifted_symbol_for(spec, z, [z], 0.1, xi_bound)
        tr = trace_formula_gap(spec, ptilde, z, 0.1, grid, chi)
        ld = logdet_formula_gap(spec, ptilde, z, 0.1, grid, chi)
        assert tr.gap == pytest.approx(
            abs(tr.operator_value - tr.quadrature_value))
        assert ld.gap == pytest.approx(
            abs(ld.operator_value - ld.quadrature_value))
        assert tr.operator_value > 0.0
