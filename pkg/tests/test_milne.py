import numpy as np
import pytest

from milnelab.discretization import AngularQuadrature, RadialGrid, half_moment
from milnelab.geometry import GEOMETRIC, NONE, ForceField
from milnelab.milne import (DIFFUSIVE, CompatibilityError, ConvergenceError, MilneProblem,
                            check_compatibility, extract_f_infinity, fit_decay_rate,
                            flux_identity_residual, max_principle_margin, solve,
                            solve_aux_ode, solve_diffusive, solve_general_source,
                            solve_inflow, source_mean, track_energies)


def small(force_mode=GEOMETRIC, h=None, n_angles=32, n_eta=120, length=20.0, **kw):
    h = (lambda p: np.cos(p) + 2.0) if h is None else h
    return MilneProblem(ForceField(0.1, mode=force_mode), h,
                        grid=RadialGrid.graded(length, n_eta),
                        quad=AngularQuadrature(n_angles), **kw)


@pytest.fixture(scope="module")
def geo_cos2():
    return solve_inflow(small(GEOMETRIC, n_angles=64, n_eta=300, length=30.0))


@pytest.fixture(scope="module")
def flat_cos2():
    return solve_inflow(small(NONE, n_angles=64, n_eta=300, length=30.0))


class TestTracks:
    @pytest.mark.parametrize("mode", [GEOMETRIC, NONE])
    def test_weights_sum_to_two(self, mode):
        q = AngularQuadrature(32)
        e, de = track_energies(ForceField(0.1, mode=mode), q, RadialGrid.graded(20, 100).nodes)
        assert de.sum() == pytest.approx(2.0, abs=1e-13)
        assert np.all(de > 0) and np.all(np.diff(e) < 0)

    def test_flat_tracks_are_wall_nodes(self):
        q = AngularQuadrature(16)
        e, _ = track_energies(ForceField(0.1, mode=NONE), q)
        assert np.allclose(np.sort(e), np.sort(np.cos(q.nodes[q.incoming])))


class TestConstants:
    @pytest.mark.parametrize("mode", [GEOMETRIC, NONE])
    def test_inflow_constant(self, mode):
        sol = solve_inflow(small(mode, h=lambda p: np.full(np.shape(p), 7.0)))
        assert np.max(np.abs(sol.f - 7.0)) < 1e-10
        assert sol.f_infinity == pytest.approx(7.0, abs=1e-10)

    @pytest.mark.parametrize("mode", [GEOMETRIC, NONE])
    def test_diffusive_constant_via_normalization(self, mode):
        prob = small(mode, h=lambda p: np.zeros(np.shape(p)), boundary_kind=DIFFUSIVE,
                     normalization=-1.5)
        sol = solve_diffusive(prob)
        assert np.max(np.abs(sol.f + 1.5)) < 1e-10
        assert "normalization-violated" not in sol.flags


class TestMaximumPrinciple:
    @pytest.mark.parametrize("name", ["geo_cos2", "flat_cos2"])
    def test_band(self, name, request):
        sol = request.getfixturevalue(name)
        tol = sol.problem.quad.tolerance()
        assert 1 - tol <= sol.f.min() and sol.f.max() <= 3 + tol
        assert 1.5 - tol <= sol.q[0] <= 2.5 + tol
        assert max_principle_margin(sol) > -tol

    @pytest.mark.parametrize("name", ["geo_cos2", "flat_cos2"])
    def test_symmetric_data_gives_flat_average(self, name, request):
        # cos(phi) is odd under phi -> pi - phi, so fbar = 2 everywhere
        sol = request.getfixturevalue(name)
        assert np.max(np.abs(sol.q - 2.0)) < 1e-9
        assert sol.f_infinity == pytest.approx(2.0, abs=1e-9)

    def test_evaluate_reproduces_nodes(self, geo_cos2):
        i, j = 40, 10
        assert geo_cos2.evaluate(geo_cos2.eta[i], geo_cos2.phi[j]) == pytest.approx(
            geo_cos2.f[i, j], abs=1e-12)

    def test_wall_trace_is_data(self, geo_cos2):
        phi = np.array([0.3, 1.2, 2.9])
        assert np.allclose(geo_cos2.evaluate(0.0, phi), np.cos(phi) + 2, atol=1e-14)


class TestIdentities:
    @pytest.mark.parametrize("name", ["geo_cos2", "flat_cos2"])
    def test_orthogonality(self, name, request):
        sol = request.getfixturevalue(name)
        tol = sol.problem.quad.tolerance()
        assert np.max(np.abs(sol.diagnostics.orthogonality_residual)) <= 5 * tol
        assert np.ptp(sol.diagnostics.weighted_flux) <= 5 * tol

    def test_wall_moment_of_odd_data(self):
        sol = solve_inflow(small(GEOMETRIC, h=lambda p: np.cos(3 * p)))
        assert abs(sol.wall_moment) < 1e-12

    def test_flux_identity_flat_source(self):
        prob = small(NONE, n_angles=64, n_eta=200, length=25.0,
                     source=lambda e, p: np.exp(-e) + 0 * p)
        sol = solve_inflow(prob)
        assert np.max(np.abs(flux_identity_residual(sol))) < 1e-6


class TestDecay:
    def test_positive_rate(self, geo_cos2):
        assert geo_cos2.decay.kind == "fit"
        assert geo_cos2.decay_K0 > 0.2

    def test_fit_recovers_rate(self):
        eta = np.linspace(0, 30, 301)
        f = 2 + np.exp(-0.7 * eta)[:, None] * np.ones((1, 4))
        assert fit_decay_rate(eta, f, 2.0).rate == pytest.approx(0.7, rel=1e-8)

    def test_floor_branch(self):
        eta = np.linspace(0, 30, 301)
        f = np.full((301, 4), 3.0)
        fit = fit_decay_rate(eta, f, 3.0)
        assert fit.kind == "floor" and np.isinf(fit.rate)

    def test_f_infinity_extractor(self):
        q = AngularQuadrature(32)
        eta = np.linspace(0, 10, 11)
        f = np.full((11, 32), 4.25)
        assert extract_f_infinity(eta, f, q) == pytest.approx((4.25, 4.25), abs=1e-14)


class TestCompatibility:
    @pytest.mark.parametrize("h, defect", [(lambda p: np.ones(np.shape(p)), 2.0),
                                           (np.cos, 0.0),
                                           (lambda p: np.cos(3 * p), 0.0)])
    def test_defects(self, h, defect):
        res = check_compatibility(small(h=h, boundary_kind=DIFFUSIVE))
        assert res.defect == pytest.approx(defect, abs=1e-10)
        assert res.passed == (defect == 0.0)

    def test_rejection(self):
        with pytest.raises(CompatibilityError) as info:
            solve_diffusive(small(h=lambda p: np.ones(np.shape(p)), boundary_kind=DIFFUSIVE))
        assert info.value.defect == pytest.approx(2.0)

    def test_reduction_normalization(self):
        sol = solve(small(h=lambda p: np.cos(3 * p), boundary_kind=DIFFUSIVE))
        assert abs(sol.wall_moment) < 1e-6
        assert abs(half_moment(sol.f[0], sol.problem.quad)) < 5 * sol.problem.quad.tolerance()


class TestSolvers:
    @pytest.mark.parametrize("solver", ["iterate", "anderson", "krylov"])
    def test_agree_with_direct(self, solver):
        prob = small(GEOMETRIC, n_angles=16, n_eta=60, length=12.0)
        ref = solve_inflow(prob)
        other = solve_inflow(prob, solver=solver, tol=1e-11)
        assert np.max(np.abs(other.f - ref.f)) < 1e-8

    def test_iteration_budget(self):
        prob = small(GEOMETRIC, n_angles=16, n_eta=60, length=12.0)
        with pytest.raises(ConvergenceError) as info:
            solve_inflow(prob, solver="iterate", max_iter=3)
        assert len(info.value.history) == 3

    def test_unknown_solver(self):
        with pytest.raises(ValueError):
            solve_inflow(small(n_angles=16, n_eta=40), solver="magic")

    def test_problem_validation(self):
        with pytest.raises(ValueError):
            small(boundary_kind="specular")
        with pytest.raises(ValueError):
            small(penalty=-1.0)


class TestGeneralSource:
    def test_aux_ode_flat(self):
        # -a' + 2 S_Q = 0 with S_Q = exp(-eta): a = -2 exp(-eta)
        aux = solve_aux_ode(lambda e: np.exp(-np.asarray(e)), ForceField(0.1, mode=NONE))
        eta = np.array([0.0, 1.0, 5.0])
        assert np.allclose(aux(eta), -2 * np.exp(-eta), atol=1e-12)

    def test_source_mean(self):
        s = source_mean(lambda e, p: np.exp(-e) * (1 + np.cos(p)))
        assert s(np.array([0.0, 2.0])) == pytest.approx(np.exp(-np.array([0.0, 2.0])))

    @pytest.mark.slow
    def test_decomposition_agrees(self):
        prob = small(NONE, n_angles=32, n_eta=150, length=20.0,
                     source=lambda e, p: np.exp(-e) * (1 + np.sin(p)))
        sol = solve_general_source(prob, mode="decomposition")
        assert sol.decomposition_difference < 1e-2
