"""Matrix assembly, norms, and shifted-symbol tests."""

import math

import numpy as np
import pytest

from torweyl.operators import (
    BandwidthError,
    GridParams,
    GuardError,
    assemble_differential,
    assemble_multiplier,
    assemble_toroidal_pdo,
    bump_profile,
    find_shifted_symbol,
    hs_norm,
    make_lifted_symbol,
    sup_norm,
)
from torweyl.symbols import PhaseGrid, SymbolSpec, TrigPoly, catalog_symbol

TWO_PI = 2.0 * math.pi


def flip(n):
    return np.eye(n)[::-1]


class TestAssembleDifferential:
    def test_pure_frequency_is_diagonal(self):
        spec = SymbolSpec(m=1, a=(TrigPoly.zero(), TrigPoly.constant(1.0)))
        got = assemble_differential(spec, GridParams(h=0.3, K=1)).entries
        assert np.array_equal(got, np.diag([-0.3, 0.0, 0.3]).astype(complex))

    def test_multiplier_is_shift(self):
        spec = SymbolSpec(m=0, a=(TrigPoly.wave(1),))
        got = assemble_differential(spec, GridParams(h=1.0, K=1)).entries
        expected = np.eye(3, k=-1).astype(complex)
        assert np.array_equal(got, expected)

    def test_hand_assembled_sum(self):
        spec = SymbolSpec(m=2, a=(TrigPoly.wave(1), TrigPoly.zero(),
                                  TrigPoly.constant(1.0)))
        got = assemble_differential(spec, GridParams(h=1.0, K=1)).entries
        expected = np.diag([1.0, 0.0, 1.0]) + np.eye(3, k=-1)
        assert np.allclose(got, expected, atol=0.0)

    def test_h_corrections_enter_with_weight_h(self):
        base = SymbolSpec(m=1, a=(TrigPoly.zero(), TrigPoly.constant(1.0)))
        corrected = SymbolSpec(
            m=1,
            a=(TrigPoly.zero(), TrigPoly.constant(1.0)),
            h_corrections=(TrigPoly.constant(1.0), TrigPoly.zero()),
        )
        h = 0.25
        grid = GridParams(h=h, K=2)
        diff = (assemble_differential(corrected, grid).entries
                - assemble_differential(base, grid).entries)
        assert np.allclose(diff, h * np.eye(5), atol=0.0)

    def test_bandwidth_overflow_names_coefficient(self):
        wide = SymbolSpec(m=1, a=(TrigPoly.wave(5), TrigPoly.constant(1.0)))
        with pytest.raises(BandwidthError, match="a_0"):
            assemble_differential(wide, GridParams(h=0.5, K=1))

    def test_linear_in_coefficients(self):
        rng = np.random.default_rng(5)
        grid = GridParams(h=0.2, K=6)

        def random_spec():
            polys = []
            for _ in range(3):
                polys.append(TrigPoly({k: complex(*rng.standard_normal(2))
                                       for k in range(-2, 3)}))
            polys.append(TrigPoly.constant(complex(*rng.standard_normal(2))))
            return SymbolSpec(m=3, a=tuple(polys))

        a, b = random_spec(), random_spec()
        summed = SymbolSpec(m=3, a=tuple(pa + pb for pa, pb in zip(a.a, b.a)))
        lhs = assemble_differential(summed, grid).entries
        rhs = (assemble_differential(a, grid).entries
               + assemble_differential(b, grid).entries)
        assert np.allclose(lhs, rhs, atol=1e-15)

    def test_conjugation_symmetry_for_even_real_specs(self):
        # with a real even symbol whose x-dependence sits at order zero,
        # the matrix satisfies M^T = J M J for the frequency flip J
        rng = np.random.default_rng(7)
        a0 = TrigPoly({0: 0.3})
        for k in (1, 2, 3):
            c = complex(*rng.standard_normal(2))
            a0 = a0 + TrigPoly({k: c, -k: c.conjugate()}, real=True)
        spec = SymbolSpec(m=2, a=(a0, TrigPoly.zero(), TrigPoly.constant(2.0)))
        m = assemble_differential(spec, GridParams(h=0.15, K=5)).entries
        j = flip(11)
        assert np.array_equal(m.T, j @ m @ j)


class TestAssembleMultiplier:
    def test_constant_gives_identity(self):
        got = assemble_multiplier(TrigPoly.constant(1.0), GridParams(h=0.1, K=3))
        assert np.array_equal(got.entries, np.eye(7).astype(complex))

    def test_cosine_gives_symmetric_toeplitz(self):
        got = assemble_multiplier(TrigPoly.cosine(), GridParams(h=0.1, K=2)).entries
        expected = 0.5 * (np.eye(5, k=1) + np.eye(5, k=-1))
        assert np.array_equal(got, expected.astype(complex))

    def test_real_symbol_hermitian_persymmetric(self):
        q = TrigPoly({0: 0.5, 1: 1 - 0.5j, -1: 1 + 0.5j, 2: 2j, -2: -2j},
                     real=True)
        m = assemble_multiplier(q, GridParams(h=0.1, K=3)).entries
        assert np.allclose(m, m.conj().T, atol=0.0)          # Hermitian
        j = flip(7)
        assert np.array_equal(m, j @ m.T @ j)                # persymmetric
        assert np.array_equal(m, np.conj(j @ m @ j))         # combined

    def test_matches_order_zero_differential(self):
        q = TrigPoly({2: 1 + 1j, -1: 0.5})
        grid = GridParams(h=0.7, K=4)
        a = assemble_multiplier(q, grid).entries
        b = assemble_differential(SymbolSpec(m=0, a=(q,)), grid).entries
        assert np.array_equal(a, b)


class TestToroidalPdo:
    def test_frequency_symbol_matches_differential(self):
        grid = GridParams(h=0.3, K=5)
        got = assemble_toroidal_pdo(lambda x, xi: xi + 0.0 * x, grid).entries
        expected = np.diag(0.3 * np.arange(-5, 6)).astype(complex)
        assert np.allclose(got, expected, atol=1e-14)

    def test_band_limited_multiplier_exact(self):
        g = TrigPoly({1: 0.3 + 0.2j, -2: 1.1, 3: -0.4j})
        grid = GridParams(h=0.1, K=8)
        a = assemble_toroidal_pdo(lambda x, xi: g(x) + 0.0 * xi, grid).entries
        b = assemble_multiplier(g, grid).entries
        assert np.max(np.abs(a - b)) < 1e-12

    def test_constant_symbol(self):
        grid = GridParams(h=0.2, K=3)
        got = assemble_toroidal_pdo(lambda x, xi: 2.5j + 0.0 * x + 0.0 * xi,
                                    grid).entries
        assert np.allclose(got, 2.5j * np.eye(7), atol=1e-14)

    def test_minimum_x_resolution_enforced(self):
        with pytest.raises(ValueError):
            assemble_toroidal_pdo(lambda x, xi: xi, GridParams(h=0.1, K=4),
                                  n_x=10)

    def test_mixed_symbol_matches_differential_assembly(self):
        # x-dependent coefficients times frequency powers quantize to the
        # same matrix through either assembly path
        a0 = TrigPoly({1: 0.5 - 0.25j, -1: 0.3, 0: 1.0})
        a2 = TrigPoly({2: 0.2j, 0: 1.5})
        spec = SymbolSpec(m=2, a=(a0, TrigPoly.zero(), a2))
        grid = GridParams(h=0.2, K=6)
        direct = assemble_differential(spec, grid).entries
        quantized = assemble_toroidal_pdo(
            lambda x, xi: a0(x) + a2(x) * xi**2, grid).entries
        assert np.max(np.abs(direct - quantized)) < 1e-12

    def test_matrix_entries_immutable(self):
        spec = SymbolSpec(m=1, a=(TrigPoly.zero(), TrigPoly.constant(1.0)))
        op = assemble_differential(spec, GridParams(h=0.5, K=2))
        with pytest.raises(ValueError):
            op.entries[0, 0] = 5.0


class TestHsNorm:
    def test_single_mode(self):
        q = TrigPoly({3: 1.0 / math.sqrt(TWO_PI)})
        for h, s in ((0.5, 2.0), (0.1, 1.0)):
            assert hs_norm(q, s, h) == pytest.approx((1 + (h * 3) ** 2) ** (s / 2))

    def test_constant(self):
        q = TrigPoly.constant(2.0)
        assert hs_norm(q, 1.5, 0.3) == pytest.approx(2.0 * math.sqrt(TWO_PI))

    def test_two_mode_parseval(self):
        q = TrigPoly({0: 1.0, 1: 1.0})
        assert hs_norm(q, 1.0, 1.0) == pytest.approx(math.sqrt(6 * math.pi))

    def test_classical_mode_freezes_h(self):
        q = TrigPoly({4: 1.0, -2: 2.0})
        assert hs_norm(q, 2.0, 0.01, mode="classical") == pytest.approx(
            hs_norm(q, 2.0, 1.0))

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            hs_norm(TrigPoly.constant(1.0), 1.0, 0.1, mode="fancy")


def random_band(rng, kmax):
    g = rng.standard_normal((2 * kmax + 1, 2))
    return TrigPoly({k: complex(a, b)
                     for k, (a, b) in zip(range(-kmax, kmax + 1), g)})


class TestSobolevInequalities:
    """The multiplication and sup-norm bounds hold with one constant
    across the h range when the random band scales like 1/h."""

    @pytest.mark.parametrize("s", [1.0, 2.0])
    def test_ratio_statistics_uniform_in_h(self, s):
        stats = {}
        for h in (0.1, 0.05, 0.02):
            kmax = int(math.ceil(1.0 / h))
            rng = np.random.default_rng(1234)
            r_prod, r_sup, r_mixed = [], [], []
            for _ in range(40):
                u = random_band(rng, kmax)
                v = random_band(rng, kmax)
                uv = u * v
                nu, nv = hs_norm(u, s, h), hs_norm(v, s, h)
                r_prod.append(hs_norm(uv, s, h) / (h ** -0.5 * nu * nv))
                r_sup.append(sup_norm(u) / (h ** -0.5 * nu))
                r_mixed.append(hs_norm(uv, s, h)
                               / (hs_norm(u, s, h, mode="classical") * nv))
            stats[h] = (max(r_prod), max(r_sup), max(r_mixed))
        for i in range(3):
            assert stats[0.02][i] <= 1.2 * stats[0.1][i]


class TestShiftedSymbols:
    def test_bump_profile_shape(self):
        t = np.array([0.0, 0.5, 1.0, 1.2, 1.8, 2.0, 3.0])
        phi = bump_profile(t)
        assert np.array_equal(phi[:3], [1.0, 1.0, 1.0])
        assert phi[3] > phi[4] > 0.0
        assert np.array_equal(phi[5:], [0.0, 0.0])

    def test_value_bump_clears_guard(self):
        spec = catalog_symbol("xi2+exp(ix)")
        phase = PhaseGrid(n_x=256, xi_lo=-2.0, xi_hi=2.0, n_xi=256)
        z = 0.5 + 0.3j
        shifted, _, _ = find_shifted_symbol(spec, z, [z], phase, guard=0.1)
        x = phase.x_nodes()
        xi = phase.xi_nodes()
        vals = np.asarray(shifted(x[:, None], xi[None, :]))
        assert float(np.min(np.abs(vals - z))) >= 0.1

    def test_guard_failure_raises(self):
        spec = catalog_symbol("xi2+exp(ix)")
        phase = PhaseGrid(n_x=64, xi_lo=-2.0, xi_hi=2.0, n_xi=64)
        with pytest.raises(GuardError):
            find_shifted_symbol(spec, 0.5, [0.5], phase, guard=50.0)

    def test_lifted_symbol_agrees_outside_window(self):
        spec = catalog_symbol("xi2+exp(ix)")
        lifted = make_lifted_symbol(spec, shift=2.0, xi_on=1.0, xi_off=1.3)
        x = np.linspace(0, TWO_PI, 32)
        far = spec.eval_principal(x, np.full_like(x, 1.5))
        assert np.allclose(np.asarray(lifted(x, np.full_like(x, 1.5))), far,
                           atol=0.0)
        near = np.asarray(lifted(x, np.zeros_like(x)))
        assert np.allclose(near, spec.eval_principal(x, np.zeros_like(x)) + 2j,
                           atol=1e-15)


class TestSupNorm:
    def test_matches_dense_evaluation(self):
        q = TrigPoly({1: 1.0, -3: 2j, 5: -0.7})
        x = np.linspace(0, TWO_PI, 100_001)
        assert sup_norm(q) == pytest.approx(float(np.max(np.abs(q(x)))), rel=1e-6)
