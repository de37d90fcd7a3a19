import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from milnelab.elliptic import (FourierBoundaryData, RadialSource, UnsupportedFeature,
                               bessel_i, gradient, solve_laplace_dirichlet,
                               solve_modified_helmholtz_neumann)


# scipy's iv returns nan for arguments near the smallest normal float
@given(st.integers(0, 40), st.floats(1e-12, 1.0))
def test_bessel_matches_scipy(k, r):
    assert bessel_i(k, r) == pytest.approx(special.iv(k, r), rel=1e-13, abs=1e-300)


def test_bessel_at_origin():
    assert bessel_i(0, 0.0) == 1.0 and bessel_i(3, 0.0) == 0.0


def test_from_samples_round_trip():
    th = 2 * np.pi * np.arange(16) / 16
    v = 1.5 + np.cos(th) - 0.25 * np.sin(3 * th) + 0.1 * np.cos(8 * th)
    data = FourierBoundaryData.from_samples(v)
    assert np.allclose(data(th), v, atol=1e-14)
    assert data.a[0] == pytest.approx(3.0)
    assert FourierBoundaryData.constant(4.0)(np.array([0.2, 3.0])) == pytest.approx([4.0, 4.0])


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        FourierBoundaryData([1.0, np.nan], [0.0])


class TestLaplace:
    data = FourierBoundaryData([1.0, 2.0, 0.0, 0.5], [0.0, -1.0, 0.0, 0.0])

    def test_trace_and_harmonicity(self):
        sol = solve_laplace_dirichlet(self.data)
        th = np.linspace(0, 2 * np.pi, 9)
        assert np.allclose(sol(1.0, th), self.data(th))
        assert np.max(np.abs(sol.operator_residual(np.array([0.3, 0.8]), 1.1))) < 1e-12

    def test_cartesian_form(self):
        # 0.5 + 2x - y + 0.5 (x^3 - 3 x y^2)
        sol = solve_laplace_dirichlet(self.data)
        x = np.array([[0.3, -0.4], [0.0, 0.0], [0.6, 0.1]])
        gx = 2 + 1.5 * (x[:, 0] ** 2 - x[:, 1] ** 2)
        gy = -1 - 3 * x[:, 0] * x[:, 1]
        assert np.allclose(gradient(sol, x), np.stack([gx, gy], -1), atol=1e-13)

    def test_gradient_outside(self):
        with pytest.raises(ValueError):
            gradient(solve_laplace_dirichlet(self.data), np.array([1.2, 0.0]))


class TestHelmholtz:
    def test_neumann_and_residual(self):
        data = FourierBoundaryData([0.4, 1.0, -0.3], [0.0, 0.0, 2.0])
        sol = solve_modified_helmholtz_neumann(data)
        th = np.linspace(0, 2 * np.pi, 11)
        ur, _ = sol.derivatives(1.0, th)
        assert np.allclose(ur, data(th), atol=1e-13)
        assert np.max(np.abs(sol.operator_residual(np.array([0.2, 0.7, 1.0]), th[:, None]))) < 1e-11

    def test_radial_mode_value(self):
        sol = solve_modified_helmholtz_neumann(FourierBoundaryData.constant(1.0))
        assert sol(0.5, 0.0) == pytest.approx(special.i0(0.5) / special.i1(1.0))

    def test_radial_source(self):
        # u = 1 solves Lap u - u = -1 with zero flux
        src = RadialSource(lambda r: -np.ones_like(r))
        r = np.linspace(0, 1, 7)
        assert np.allclose(src(r), 1.0, atol=1e-6)
        assert np.allclose(src.derivative(r), 0.0, atol=1e-6)

    def test_theta_dependent_source_refused(self):
        with pytest.raises(UnsupportedFeature):
            solve_modified_helmholtz_neumann(FourierBoundaryData.constant(0.0),
                                             volume_source=np.ones((4, 4)))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=6),
       st.floats(0.05, 0.95), st.floats(0, 2 * np.pi))
def test_laplace_mean_value(coeffs, r, th):
    sol = solve_laplace_dirichlet(FourierBoundaryData(coeffs, [0.0] * len(coeffs)))
    ring = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    assert np.mean(sol(r, ring)) == pytest.approx(coeffs[0] / 2, abs=1e-12)
