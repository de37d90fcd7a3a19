import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from milnelab.geometry import (C1_CUBIC, GEOMETRIC, NONE, PSI, PSI0, CharacteristicDomainError,
                               CutoffSpec, DomainError, ForceField, apply_A, apply_T,
                               arc_length, eta_plus, eval_cutoff, eval_force, eval_potential,
                               force_bounds_suite, g_weight, paired_cutoffs, phi_prime)

V_INF = 0.988918            # int_0^{3/4} psi(m) / (1 - m) dm, scipy quad
EXP_MINUS_V_INF = 0.371979


def v_oracle(eps, eta):
    f = lambda m: eval_cutoff(PSI, m) / (1 - m)
    return quad(f, 0.0, eps * eta, points=[0.5, 0.75], epsabs=1e-14, limit=200)[0]


class TestCutoff:
    def test_plateau_and_support(self):
        assert eval_cutoff(PSI, 0.0) == 1.0
        assert eval_cutoff(PSI, 0.5) == 1.0
        assert eval_cutoff(PSI, 0.75) == 0.0
        assert eval_cutoff(PSI0, 0.25) == 1.0
        assert eval_cutoff(PSI0, 0.375) == 0.0

    def test_midpoint_is_half(self):
        assert eval_cutoff(PSI, 0.625) == pytest.approx(0.5, abs=1e-15)
        assert eval_cutoff(CutoffSpec(0.5, 0.75, C1_CUBIC), 0.625) == pytest.approx(0.5)

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            eval_cutoff(PSI, -0.1)
        with pytest.raises(DomainError):
            CutoffSpec(0.6, 0.5)

    def test_pair_nesting(self):
        psi, psi0 = paired_cutoffs()
        mu = np.linspace(0, 1, 1001)
        # psi0 * psi = psi0 because psi = 1 on the support of psi0
        assert np.array_equal(psi0(mu) * psi(mu), psi0(mu))

    def test_derivative_matches_difference(self):
        mu = np.linspace(0.51, 0.74, 9)
        h = 1e-6
        fd = (PSI(mu + h) - PSI(mu - h)) / (2 * h)
        assert np.allclose(PSI.derivative(mu), fd, atol=1e-7)


class TestForce:
    def test_v_infinity(self):
        f = ForceField(0.1)
        assert f.v_infinity == pytest.approx(V_INF, abs=5e-7)
        assert np.exp(-f.v_infinity) == pytest.approx(EXP_MINUS_V_INF, abs=5e-7)
        assert f.v_infinity == pytest.approx(v_oracle(1.0, 0.75), abs=1e-12)

    @pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
    def test_potential_against_quadrature(self, eps):
        f = ForceField(eps)
        eta = np.array([0.0, 0.3, 1.0, 4.9, 5.0 / eps * 0.1, 0.55 / eps, 0.7 / eps, 2.0 / eps])
        ref = np.array([v_oracle(eps, e) for e in eta])
        assert np.allclose(eval_potential(f, eta), ref, atol=1e-12, rtol=0)

    def test_plateau_closed_form(self):
        f = ForceField(0.1)
        eta = np.linspace(0, 5, 11)
        assert np.allclose(eval_potential(f, eta), -np.log(1 - 0.1 * eta), atol=1e-15)
        assert np.allclose(eval_force(f, eta), -0.1 / (1 - 0.1 * eta), atol=1e-15)

    def test_scaling_in_eps_eta(self):
        assert eval_potential(ForceField(0.05), 20.0) == eval_potential(ForceField(0.1), 10.0)

    def test_none_mode_is_flat(self):
        f = ForceField(0.1, mode=NONE)
        assert eval_force(f, 3.0) == 0.0 and eval_potential(f, 3.0) == 0.0
        assert f.v_infinity == 0.0

    def test_increment_without_cancellation(self):
        f = ForceField(0.1)
        lo = np.array([6.0, 6.0, 2.0])
        span = np.array([1e-12, 1e-6, 1e-9])
        inc = f.potential_increment(lo, lo + span, length=span)
        # dV = -F(lo) * span to leading order
        assert np.allclose(inc, -eval_force(f, lo) * span, rtol=1e-5)

    def test_invalid(self):
        with pytest.raises(DomainError):
            ForceField(1.5)
        with pytest.raises(DomainError):
            eval_force(ForceField(0.1), -1.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.01, 0.5), st.floats(0, 200), st.floats(0, 50))
    def test_potential_monotone_and_bounded(self, eps, a, b):
        f = ForceField(eps)
        va, vb = eval_potential(f, a), eval_potential(f, a + b)
        assert 0 <= va <= vb + 1e-15
        assert vb <= np.log(4)
        assert eval_force(f, a) <= 0

    @pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
    def test_bounds_suite(self, eps):
        checks = force_bounds_suite(ForceField(eps))
        assert all(c.passed for c in checks)

    def test_bound_integrals_against_quadrature(self):
        f = ForceField(0.1)
        checks = {c.name: c.value for c in force_bounds_suite(f)}
        F2 = lambda y: eval_force(f, y) ** 2
        ref1 = quad(F2, 0, 7.5, points=[5.0], epsabs=1e-14, limit=200)[0]
        ref2 = quad(lambda y: y * F2(y), 0, 7.5, points=[5.0], epsabs=1e-14, limit=200)[0]
        assert checks["int F^2 <= 3 eps"] == pytest.approx(ref1, rel=1e-10)
        assert checks["int int F^2 <= 3 - ln 4"] == pytest.approx(ref2, rel=1e-10)


class TestCharacteristics:
    def test_turning_point_plateau(self):
        f = ForceField(0.1)
        # exp(-V) = 1 - eps*eta on the plateau
        assert f.turning_point(0.8) == pytest.approx(2.0, abs=1e-13)
        assert eta_plus(f, 0.0, np.arccos(0.8)) == pytest.approx(2.0, abs=1e-13)

    def test_escape_below_far_field_energy(self):
        f = ForceField(0.1)
        assert np.isinf(f.turning_point(0.9 * EXP_MINUS_V_INF))
        assert np.isinf(ForceField(0.1, mode=NONE).turning_point(0.5))

    def test_energy_conservation(self):
        f = ForceField(0.1)
        phi = 1.0
        p2 = phi_prime(f, phi, 0.0, 3.0)
        assert np.cos(p2) * np.exp(-eval_potential(f, 3.0)) == pytest.approx(np.cos(phi))
        with pytest.raises(CharacteristicDomainError):
            phi_prime(f, 0.2, 0.0, 6.0)

    @pytest.mark.parametrize("e", [0.95, 0.7, 0.45, 0.3, 0.1])
    def test_arc_length_against_quadrature(self, e):
        f = ForceField(0.1)
        tp = f.turning_point(e)
        hi = min(tp, 9.0)
        integrand = lambda x: 1.0 / np.sqrt(1 - (e * np.exp(eval_potential(f, x))) ** 2)
        ref = quad(integrand, 0.0, hi, points=[5.0, 7.5] if hi > 7.5 else None,
                   epsabs=1e-13, limit=400)[0]
        got = float(arc_length(f, e, 0.0, hi, tp))
        assert got == pytest.approx(ref, rel=1e-9)

    def test_arc_length_flat(self):
        f = ForceField(0.1, mode=NONE)
        assert float(arc_length(f, 0.6, 0.0, 2.0, np.inf)) == pytest.approx(2.5)

    def test_g_weight_rejects_crossing(self):
        f = ForceField(0.1)
        with pytest.raises(CharacteristicDomainError):
            g_weight(f, np.arccos(0.8), 0.0, 0.0, 3.0)

    def test_apply_A_flat_closed_form(self):
        f = ForceField(0.1, mode=NONE)
        h = lambda p: np.cos(p) + 2
        eta, phi = 1.3, 0.7
        assert apply_A(f, h, eta, phi) == pytest.approx(h(phi) * np.exp(-eta / np.sin(phi)))
        assert apply_A(f, h, eta, -0.7) == 0.0   # escapes to infinity

    def test_apply_T_constant_source(self):
        # flat geometry, H = 1, incoming: 1 - exp(-eta / sin)
        f = ForceField(0.1, mode=NONE)
        H = lambda x, p: np.ones_like(x)
        val = apply_T(f, H, 1.0, 0.9)
        assert val == pytest.approx(1 - np.exp(-1.0 / np.sin(0.9)), rel=1e-10)
        assert apply_T(f, H, 1.0, -0.9) == pytest.approx(1.0, abs=1e-12)

    def test_apply_T_turning_total_mass(self):
        # A h + T 1 with h = 1 reproduces the constant 1 along a turning path
        f = ForceField(0.1)
        h = lambda p: np.ones_like(p)
        H = lambda x, p: np.ones_like(x)
        eta, phi = 1.0, -0.6
        total = apply_A(f, h, eta, phi) + apply_T(f, H, eta, phi)
        assert total == pytest.approx(1.0, abs=1e-10)
