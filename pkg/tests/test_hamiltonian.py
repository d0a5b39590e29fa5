import math
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg

from twomode_ion.fock import FockBasis, fock_state, monomial_op, single_mode_monomial
from twomode_ion.hamiltonian import (
    CapTooSmall,
    DimensionTooLarge,
    HamiltonianModel,
    TimeDependentTerm,
    commensurate_period,
    effective_raman_model,
    full_raman_terms,
    ideal_hamiltonian,
    raman_coefficient,
    required_g13_phase,
    resonant_coupling,
    resonant_hamiltonian,
    rotation_tuned_model,
    term_frequency,
    three_level_model,
)
from twomode_ion.laser_config import DerivedCouplings, RamanPairConfig, TargetInteraction, TrapConfig

GOLDEN = Path(__file__).parent / "golden"
ROT = TargetInteraction(1, 1)
TRAP5 = TrapConfig(5.0, 1.0)


def _terms_by_exponent(model):
    return {t.exponents: t for t in model.terms}


class TestCoefficients:
    @pytest.mark.parametrize("eta", [0.1, 0.3, 0.6])
    @pytest.mark.parametrize("sign", [-1, 1])
    def test_series_reproduces_displacement(self, eta, sign):
        # exp(sign*i*eta*(c + c†)) = e^{-eta^2/2} sum (sign*i*eta)^{m+mu}/(m! mu!) c†^m c^mu
        cut, big = 4, 60
        lower = np.diag(np.sqrt(np.arange(1, big + 1)), 1)
        exact = scipy.linalg.expm(sign * 1j * eta * (lower + lower.T))[: cut + 1, : cut + 1]
        series = sum(
            math.exp(-eta**2 / 2) * (sign * 1j * eta) ** (m + mu) / (math.factorial(m) * math.factorial(mu))
            * single_mode_monomial(m, mu, cut)
            for m in range(30) for mu in range(30)
        )
        assert np.max(np.abs(series - exact)) < 1e-12

    @pytest.mark.parametrize("exps", [(0, 0, 0, 0), (1, 0, 0, 1), (2, 1, 3, 0), (0, 3, 1, 2)])
    def test_factorizes_over_modes(self, exps):
        m, mu, nu, n = exps
        g13, e12, e23 = 0.7 + 0.2j, 0.25, 0.15
        part_a = math.exp(-e12**2 / 2) * (-1j * e12) ** (m + mu) / (math.factorial(m) * math.factorial(mu))
        part_b = math.exp(-e23**2 / 2) * (1j * e23) ** (nu + n) / (math.factorial(nu) * math.factorial(n))
        assert raman_coefficient(m, mu, nu, n, g13, e12, e23) == pytest.approx(-g13 * part_a * part_b, rel=1e-14)

    def test_resonant_term_magnitude(self):
        c = raman_coefficient(1, 0, 0, 1, 1j, 0.2, 0.2)
        assert abs(c) == pytest.approx(0.04 * math.exp(-0.04), rel=1e-14)
        assert abs(c) == pytest.approx(0.0384316, abs=1e-7)

    def test_eta_to_zero(self):
        for exps in [(1, 0, 0, 0), (0, 0, 0, 1), (1, 0, 0, 1), (2, 2, 0, 0)]:
            assert raman_coefficient(*exps, 1.0, 0.0, 0.0) == 0
        assert raman_coefficient(0, 0, 0, 0, 1.0, 0.0, 0.0) == -1.0


class TestFullModel:
    def test_rotation_tuned_examples(self):
        basis = FockBasis(5, 5)
        model = rotation_tuned_model(1.0, 0.2, 0.2, TRAP5, basis)
        terms = _terms_by_exponent(model)
        assert terms[(1, 0, 0, 1)].osc_freq == 0
        assert terms[(1, 0, 0, 1)].coeff == pytest.approx(-1j * 0.04 * math.exp(-0.04))
        assert terms[(0, 1, 1, 0)].osc_freq == pytest.approx(2 * (1.0 - 5.0))
        assert terms[(0, 0, 4, 0)].osc_freq == 0
        carrier = terms[(0, 0, 0, 0)]
        assert abs(carrier.coeff) == pytest.approx(math.exp(-0.04))
        assert carrier.osc_freq == pytest.approx(1.0 - 5.0)

    def test_frequency_invariant(self):
        derived = DerivedCouplings(1.0, 0, 0, 0.3, 0.2)
        trap = TrapConfig(3.3, 1.1)
        model = full_raman_terms(derived, -0.7, trap, FockBasis(4, 3), order_cap=6)
        for t in model.terms:
            assert t.osc_freq == term_frequency(*t.exponents, 3.3, 1.1, -0.7)
            assert t.order <= 6
            assert max(t.m, t.mu) <= 4 and max(t.nu, t.n) <= 3

    def test_cap_too_small(self):
        with pytest.raises(CapTooSmall):
            full_raman_terms(DerivedCouplings(1.0, 0, 0, 0.2, 0.2), -4.0, TRAP5, FockBasis(3, 3),
                             order_cap=1, target=ROT)

    def test_floor_drops_terms(self):
        derived = DerivedCouplings(1.0, 0, 0, 0.2, 0.2)
        loose = full_raman_terms(derived, -4.0, TRAP5, FockBasis(6, 6), coeff_floor=0.0)
        tight = full_raman_terms(derived, -4.0, TRAP5, FockBasis(6, 6), coeff_floor=1e-4)
        assert len(tight.terms) < len(loose.terms)
        assert all(abs(t.coeff) >= 1e-4 for t in tight.terms)

    @pytest.mark.parametrize("t", [0.0, 0.37, 5.1, 123.4])
    def test_fast_evaluation_matches_term_sum(self, t):
        model = rotation_tuned_model(1.0, 0.3, 0.25, TrapConfig(5.5, 1.1), FockBasis(5, 4))
        assert np.max(np.abs(model.dense_at(t) - model.dense_by_sum(t))) < 1e-12

    def test_unframed_model(self):
        model = HamiltonianModel(FockBasis(3, 3), [TimeDependentTerm(1, 0, 0, 1, 0.5, 2.0),
                                                   TimeDependentTerm(2, 0, 0, 0, 0.1j, -1.0)])
        for t in (0.0, 0.8):
            assert np.max(np.abs(model.dense_at(t) - model.dense_by_sum(t))) < 1e-14

    def test_period(self):
        model = rotation_tuned_model(1.0, 0.2, 0.2, TrapConfig(110.0, 22.0), FockBasis(4, 4))
        assert model.period == pytest.approx(2 * math.pi / 22.0)
        for t in (0.3, 1.7):
            assert np.allclose(model.dense_at(t), model.dense_at(t + model.period), atol=1e-10)

    def test_incommensurate_has_no_period(self):
        assert commensurate_period([1.0, math.sqrt(2)]) is None
        assert commensurate_period([]) is None
        assert commensurate_period([2.0, 3.0]) == pytest.approx(2 * math.pi)

    def test_resonant_part_at_l5(self):
        model = rotation_tuned_model(1.0, 0.2, 0.2, TRAP5, FockBasis(8, 8))
        zero = set(_terms_by_exponent(model.resonant_part()))
        assert {(1, 0, 0, 1), (0, 0, 4, 0), (2, 1, 1, 2)} <= zero

    def test_term_table_golden(self):
        model = rotation_tuned_model(1.0, 0.2, 0.2, TRAP5, FockBasis(2, 2), order_cap=4)
        assert model.term_table() == (GOLDEN / "terms_l5_cut2_cap4.csv").read_text()


class TestResonant:
    def test_g00(self):
        d = DerivedCouplings(0.3 + 0.4j, 0, 0, 0.2, 0.3)
        expected = -(0.3 + 0.4j) * 0.2 * 0.3 * math.exp(-(0.04 + 0.09) / 2)
        assert resonant_coupling(0, 0, ROT, d) == pytest.approx(expected, rel=1e-14)

    def test_first_dressing_ratio(self):
        d = DerivedCouplings(1.0, 0, 0, 0.2, 0.2)
        ratio = abs(resonant_coupling(1, 0, ROT, d)) / abs(resonant_coupling(0, 0, ROT, d))
        assert ratio == pytest.approx(0.04 / 2, rel=1e-14)

    def test_imaginary_g13_gives_rotation_form(self):
        basis = FockBasis(4, 4)
        d = DerivedCouplings(1j, 0, 0, 0.2, 0.2)
        h = resonant_hamiltonian(ROT, d, basis, munu_cap=0).entries
        g = -abs(resonant_coupling(0, 0, ROT, d))
        bs = monomial_op(1, 0, 0, 1, basis).entries
        assert np.allclose(h, 1j * g * (bs - bs.T), atol=1e-15)

    def test_ideal_equals_leading_resonant(self):
        basis = FockBasis(5, 5)
        d = DerivedCouplings(0.2 - 0.9j, 0, 0, 0.25, 0.2)
        lead = resonant_hamiltonian(ROT, d, basis, munu_cap=0).entries
        ideal = ideal_hamiltonian(ROT, resonant_coupling(0, 0, ROT, d), basis).entries
        assert np.max(np.abs(lead - ideal)) < 1e-15

    def test_required_phase(self):
        assert required_g13_phase(TargetInteraction(1, 1, -math.pi / 2), 0.2, 0.2) == pytest.approx(math.pi / 2)
        for k_a, k_b, phase in [(3, 1, 0.4), (2, 2, -1.0)]:
            target = TargetInteraction(k_a, k_b, phase)
            arg = required_g13_phase(target, 0.2, 0.3)
            g = raman_coefficient(k_a, 0, 0, k_b, np.exp(1j * arg), 0.2, 0.3)
            assert np.angle(g) == pytest.approx(phase)


class TestIdeal:
    def test_rotation_form_is_real_antisymmetric_times_i(self):
        basis = FockBasis(3, 3)
        h = ideal_hamiltonian(ROT, 1j * 0.5, basis).entries
        assert np.allclose(h.real, 0)
        assert np.allclose(h.imag, -h.imag.T)

    def test_k31_element(self):
        basis = FockBasis(3, 1)
        h = ideal_hamiltonian(TargetInteraction(3, 1), 0.25, basis)
        element = np.vdot(fock_state(3, 0, basis).amplitudes, h.entries @ fock_state(0, 1, basis).amplitudes)
        assert element == pytest.approx(0.25 * math.sqrt(6))

    def test_zero(self):
        assert not np.any(ideal_hamiltonian(ROT, 0.0, FockBasis(2, 2)).entries)


class TestVibronic:
    basis = FockBasis(2, 2)
    trap = TrapConfig(5.0, 1.0)

    def test_decoupled_level_3(self):
        pair = RamanPairConfig(2.0, 0.0, 100.0, 90.0)
        model = three_level_model(pair, self.trap, self.basis, eta12=0.2, eta23=0.2)
        h = model.matrix.reshape(self.basis.dim, 3, self.basis.dim, 3)
        assert not np.any(h[:, 2, :, :2]) and not np.any(h[:, :2, :, 2])

    def test_dimension_cap(self):
        pair = RamanPairConfig(1.0, 1.0, 100.0, 100.0)
        with pytest.raises(DimensionTooLarge):
            three_level_model(pair, self.trap, FockBasis(10, 10), eta12=0.1, eta23=0.1, dim_cap=300)
        with pytest.raises(DimensionTooLarge):
            effective_raman_model(pair, self.trap, FockBasis(10, 10), eta12=0.1, eta23=0.1, dim_cap=200)

    def test_excited_population_from_ground(self):
        basis = FockBasis(3, 3)
        pair = RamanPairConfig(5.0, 4.0, 2000.0, 1996.0)
        model = three_level_model(pair, self.trap, basis, eta12=0.2, eta23=0.2)
        psi0 = model.product_state("1", fock_state(0, 0, basis).amplitudes)
        states = model.evolve(psi0, np.linspace(0, 200, 2001))
        peak = max(model.level_population(s, "2") for s in states)
        scale = (5.0 / 2000.0 + 4.0 / 1996.0) ** 2
        assert 0 < peak <= 4 * scale

    def test_eigen_evolution_is_unitary(self):
        pair = RamanPairConfig(5.0, 4.0, 200.0, 196.0)
        model = three_level_model(pair, self.trap, self.basis, eta12=0.3, eta23=0.2)
        psi0 = model.product_state("1", fock_state(1, 0, self.basis).amplitudes)
        states = model.evolve(psi0, [0.0, 3.0, 70.0])
        assert np.allclose(np.linalg.norm(states, axis=1), 1.0)
        assert np.allclose(states[0], psi0)
