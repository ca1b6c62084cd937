import math
import warnings

import numpy as np
import numpy.polynomial.laguerre as npl
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptqrm import adiabatic as aa
from ptqrm import model, spectral
from ptqrm.model import ModelParams

from oracles import displacement_expm, laguerre_explicit


class TestLaguerre:
    @pytest.mark.parametrize("x", [0.0, 0.3, 2.0, 11.0])
    def test_order_zero(self, x):
        assert aa.laguerre(0, x) == 1.0

    def test_order_one_root(self):
        assert aa.laguerre(1, 1.0) == 0.0

    def test_order_two(self):
        assert aa.laguerre(2, 2.0) == pytest.approx(-1.0, abs=1e-15)

    @given(st.integers(0, 25), st.floats(0, 13))
    @settings(max_examples=80, deadline=None)
    def test_matches_explicit_sum(self, n, x):
        ref = laguerre_explicit(n, x)
        assert aa.laguerre(n, x) == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_vectorized(self):
        xs = np.linspace(0, 5, 7)
        npt.assert_allclose(aa.laguerre(3, xs), [laguerre_explicit(3, x) for x in xs], atol=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 5, 17, 60])
    def test_roots_match_numpy(self, n):
        coeffs = np.zeros(n + 1)
        coeffs[n] = 1
        npt.assert_allclose(aa.laguerre_roots(n), np.sort(npl.lagroots(coeffs)), rtol=1e-10)


class TestOmega:
    def test_no_coupling(self):
        p = ModelParams(0.5, 0.1, 1.0, 0.0)
        assert all(aa.omega_n(p, n) == 0.5 for n in range(6))

    def test_laguerre_root(self):
        assert aa.omega_n(ModelParams(0.5, 0, 1, 0.5), 1) == pytest.approx(0.0, abs=1e-16)

    def test_value(self):
        assert aa.omega_n(ModelParams(0.5, 0, 1, 0.2), 0) == pytest.approx(0.5 * math.exp(-0.08))
        assert aa.omega_n(ModelParams(0.5, 0, 1, 0.2), 0) == pytest.approx(0.46156, abs=1e-5)


class TestPair:
    def test_bare_splitting(self):
        for n in range(4):
            sol = aa.aa_pair(ModelParams(0.5), n)
            assert sol.e_plus == pytest.approx(n + 0.25)
            assert sol.e_minus == pytest.approx(n - 0.25)

    def test_decoupled_value(self):
        sol = aa.aa_pair(ModelParams(0.5, 0.1), 0)
        assert sol.e_plus.real == pytest.approx(0.2449490, abs=1e-7)
        assert sol.e_minus.real == pytest.approx(-0.2449490, abs=1e-7)
        assert sol.is_pts

    def test_exceptional_point(self):
        g = 0.3
        eps = abs(aa.omega_n(ModelParams(0.5, 0, 1, g), 0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", aa.DegeneratePairWarning)
            sol = aa.aa_pair(ModelParams(0.5, eps, 1, g), 0)
        assert sol.e_plus == sol.e_minus == pytest.approx(-g * g)
        assert sol.coalesced
        npt.assert_allclose(sol.v_plus, sol.v_minus)

    def test_degenerate_canonical_basis(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", aa.DegeneratePairWarning)
            sol = aa.aa_pair(ModelParams(0.5, 0.0, 1.0, 0.5), 1)
        assert sol.degenerate
        npt.assert_array_equal(sol.v_plus, [1, 0])
        npt.assert_array_equal(sol.v_minus, [0, 1])

    def test_broken_branch_sign(self):
        sol = aa.aa_pair(ModelParams(0.5, 0.8), 0)
        assert sol.e_plus.imag > 0 > sol.e_minus.imag
        assert not sol.is_pts

    def test_subnormal_tunnelling_finite_vectors(self):
        sol = aa.aa_pair(ModelParams(5e-324, 0.5, 1.0, 0.0), 0)
        assert np.all(np.isfinite(sol.v_plus)) and np.all(np.isfinite(sol.v_minus))
        npt.assert_allclose(np.abs(sol.v_plus), [1, 0], atol=1e-300)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1.5), st.integers(0, 8))
    @settings(max_examples=80, deadline=None)
    def test_trace_and_reality(self, delta, eps, g, n):
        p = ModelParams(delta, eps, 1.0, g)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", aa.DegeneratePairWarning)
            sol = aa.aa_pair(p, n)
        assert sol.e_plus + sol.e_minus == pytest.approx(2 * (n - g * g), abs=1e-12)
        if abs(sol.omega_n) > eps:
            assert sol.e_plus.imag == sol.e_minus.imag == 0
        elif abs(sol.omega_n) < eps:
            assert sol.e_plus == pytest.approx(np.conj(sol.e_minus), abs=1e-12)

    @given(st.floats(0.05, 1), st.floats(0, 1), st.floats(0, 1.2), st.integers(0, 5))
    @settings(max_examples=60, deadline=None)
    def test_vectors_diagonalize_block(self, delta, eps, g, n):
        p = ModelParams(delta, eps, 1.0, g)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", aa.DegeneratePairWarning)
            sol = aa.aa_pair(p, n)
        if sol.coalesced or sol.degenerate:
            return
        block = aa.aa_block(p, n)
        npt.assert_allclose(block @ sol.v_plus, sol.e_plus * sol.v_plus, atol=1e-9)
        npt.assert_allclose(block @ sol.v_minus, sol.e_minus * sol.v_minus, atol=1e-9)
        assert np.linalg.norm(sol.v_plus) == pytest.approx(1.0)


class TestObservables:
    def test_fidelity_hermitian(self):
        assert aa.aa_fidelity(ModelParams(0.5, 0, 1, 0.3), 0) == 0

    def test_fidelity_at_ep(self):
        p = ModelParams(0.5, 0, 1, 0.3)
        eps = aa.aa_ep_epsilon(p, 0)
        assert aa.aa_fidelity(p.replace(epsilon=eps), 0) == pytest.approx(1.0)

    def test_fidelity_value(self):
        # Omega_0 = delta at g = 0
        assert aa.aa_fidelity(ModelParams(0.2, 0.1), 0) == pytest.approx(0.25)
        assert aa.aa_fidelity(ModelParams(0.1, 0.2), 0) == pytest.approx(0.25)

    def test_fidelity_degenerate_zero(self):
        assert aa.aa_fidelity(ModelParams(0.5, 0.0, 1.0, 0.5), 1) == 0.0

    def test_photon(self):
        assert aa.aa_photon(ModelParams(0.5), 3) == 3
        assert aa.aa_photon(ModelParams(0.5, 0.0, 1, 0.7), 3) == pytest.approx(3.49)
        assert aa.aa_photon(ModelParams(0.5, 0.4, 1, 0.7), 3) == pytest.approx(3.49)

    def test_population_cases(self):
        assert aa.aa_qubit_population(ModelParams(0.5), 0) == (1.0, 0.0)
        assert aa.aa_qubit_population(ModelParams(0.1, 0.2), 0) == (0.5, 0.5)
        wp, wm = aa.aa_qubit_population(ModelParams(0.2, 0.1), 0)
        assert wp == pytest.approx(0.5 * (1 + math.sqrt(3) / 2))
        assert wm == pytest.approx(0.0670, abs=1e-4)

    def test_population_negative_omega(self):
        # Omega_1 < 0 just past the first Laguerre root.
        p = ModelParams(0.5, 0.0, 1.0, 0.6)
        assert aa.omega_n(p, 1) < 0
        assert aa.aa_qubit_population(p, 1) == (0.0, 1.0)

    def test_population_degenerate_flagged(self):
        with pytest.warns(aa.DegeneratePairWarning):
            assert aa.aa_qubit_population(ModelParams(0.5, 0.0, 1.0, 0.5), 1) == (1.0, 0.0)


class TestDisplacement:
    def test_zero(self):
        npt.assert_allclose(aa.displacement_matrix(0.0, 10), np.eye(11), atol=1e-15)

    @pytest.mark.parametrize("alpha", [0.2, 0.7, 1.5])
    def test_vacuum_overlap(self, alpha):
        assert aa.displacement_matrix(alpha, 30)[0, 0].real == pytest.approx(math.exp(-alpha ** 2 / 2))

    @pytest.mark.parametrize("alpha", [-0.9, 0.35, 0.7, 1.8])
    def test_matches_matrix_exponential(self, alpha):
        npt.assert_allclose(aa.displacement_matrix(alpha, 40), displacement_expm(alpha, 40),
                            atol=1e-12)

    def test_unitarity_residual(self):
        assert aa.displacement_unitarity_residual(0.7, 60) <= 1e-8

    def test_residual_decreases_with_truncation(self):
        res = [aa.displacement_unitarity_residual(0.7, n) for n in (10, 20, 40, 60)]
        assert res[0] > res[1] > 1e-13
        assert all(b <= max(a, 1e-13) for a, b in zip(res, res[1:]))

    def test_sign_convention(self):
        # D(alpha) = exp[-alpha (a^dag - a)] moves <x> = <a + a^dag> to -2 alpha.
        d = aa.displacement_matrix(0.5, 40)
        a = model.build_annihilation(40)
        vac = d[:, 0]
        assert np.vdot(vac, (a + a.T) @ vac).real == pytest.approx(-1.0, abs=1e-10)


class TestBareState:
    def test_decoupled_plus(self):
        psi = aa.aa_state_in_bare_basis(ModelParams(0.5), 2, "+", 6)
        assert abs(psi[model.basis_index(2, 1)]) == pytest.approx(1.0)

    def test_decoupled_minus(self):
        psi = aa.aa_state_in_bare_basis(ModelParams(0.5), 2, "-", 6)
        assert abs(psi[model.basis_index(2, 0)]) == pytest.approx(1.0)

    def _overlaps(self, delta):
        p = ModelParams(delta, 0.1, 1.0, 0.2)
        pair = spectral.exact_pairs(p, 60, n_pairs=1)[0]
        decomp = spectral.eigendecompose(model.build_hamiltonian(p, "bare_z", 60))
        out = {}
        for branch, idx in (("+", pair.index_plus), ("-", pair.index_minus)):
            psi = aa.aa_state_in_bare_basis(p, 0, branch, 60)
            out[branch] = abs(np.vdot(psi, decomp.vectors[:, idx])) ** 2
        return out

    def test_overlap_with_exact(self):
        ov = self._overlaps(0.5)
        assert ov["-"] >= 0.99
        assert ov["+"] >= 0.97

    def test_overlap_improves_as_delta_shrinks(self):
        worst = [min(self._overlaps(d).values()) for d in (0.5, 0.2, 0.05)]
        assert worst[0] < worst[1] < worst[2]
        assert worst[2] > 0.9999

    @pytest.mark.parametrize("n", [0, 1, 3])
    def test_photon_expectation(self, n):
        p = ModelParams(0.5, 0.0, 1.0, 0.4)
        psi = aa.aa_state_in_bare_basis(p, n, "+", 60)
        photon = np.repeat(np.arange(61), 2)
        assert np.sum(photon * abs(psi) ** 2) == pytest.approx(n + 0.16, abs=1e-6)

    def test_too_high_level(self):
        with pytest.raises(ValueError):
            aa.aa_state_in_bare_basis(ModelParams(0.5), 7, "+", 6)


class TestPredictors:
    def test_ep_decoupled(self):
        assert aa.aa_ep_epsilon(ModelParams(0.5), 0) == 0.5

    def test_ep_annihilated(self):
        assert aa.aa_ep_epsilon(ModelParams(0.5, 0, 1, 0.5), 1) == pytest.approx(0, abs=1e-16)

    def test_ep_value(self):
        assert aa.aa_ep_epsilon(ModelParams(0.5, 0.3, 1, 0.2), 0) == pytest.approx(0.46156, abs=1e-5)

    def test_ep_couplings_solve(self):
        p = ModelParams(0.5, 0.1)
        for n in range(4):
            for g in aa.aa_ep_couplings(p, n, 1.0):
                assert abs(aa.omega_n(p.replace(g=g), n)) == pytest.approx(0.1, abs=1e-12)

    def test_juddian_first(self):
        assert aa.juddian_points(1) == [pytest.approx(0.5, abs=1e-12)]

    def test_juddian_second(self):
        npt.assert_allclose(aa.juddian_points(2),
                            [math.sqrt(2 - math.sqrt(2)) / 2, math.sqrt(2 + math.sqrt(2)) / 2],
                            atol=1e-12)

    def test_juddian_none_for_zero(self):
        assert aa.juddian_points(0) == []

    def test_juddian_scaling_and_cut(self):
        npt.assert_allclose(aa.juddian_points(3, omega=2.0), 2 * np.array(aa.juddian_points(3)))
        assert aa.juddian_points(3, g_max=0.8) == aa.juddian_points(3)[:2]

    def test_juddian_zeros_of_omega(self):
        for n in (1, 2, 3, 4):
            for g in aa.juddian_points(n):
                assert aa.omega_n(ModelParams(0.5, 0.2, 1, g), n) == pytest.approx(0, abs=1e-12)
