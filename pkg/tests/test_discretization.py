import numpy as np
import pytest
from hypothesis import given, strategies as st

from milnelab.discretization import (AngularQuadrature, DiskGrid, GridError, RadialGrid,
                                     angular_average, half_moment, half_moment_weights, inner,
                                     l2_norm, sup_norm)


class TestQuadrature:
    @pytest.mark.parametrize("n", [3, 6, 10, 4])
    def test_rejects_bad_counts(self, n):
        with pytest.raises(GridError):
            AngularQuadrature(n)

    def test_no_grazing_nodes(self):
        q = AngularQuadrature(64)
        assert np.min(np.abs(np.sin(q.nodes))) > 0.02
        assert q.incoming.sum() == 32

    @given(st.sampled_from([8, 16, 32, 64, 128]), st.integers(0, 7))
    def test_trig_exactness(self, n, k):
        q = AngularQuadrature(n)
        assert inner(np.cos(k * q.nodes), 1.0, q) == pytest.approx(2 * np.pi * (k == 0),
                                                                   abs=1e-12)
        assert angular_average(np.sin(k * q.nodes), q) == pytest.approx(0.0, abs=1e-13)

    def test_half_moment_exact_on_constants(self):
        q = AngularQuadrature(32)
        assert half_moment_weights(q).sum() == pytest.approx(1.0, abs=1e-15)
        assert half_moment(np.full(32, 3.5), q) == pytest.approx(3.5, abs=1e-14)

    def test_half_moment_of_sin_converges(self):
        # P(-sin) = 1/2 int_{sin<0} sin^2 = pi/4
        errs = []
        for n in (32, 64, 128):
            q = AngularQuadrature(n)
            errs.append(abs(half_moment(-np.sin(q.nodes), q) - np.pi / 4))
        assert errs[2] < errs[1] < errs[0] < 5 * q.spacing ** 2 * 16

    def test_tolerance(self):
        assert AngularQuadrature(64).tolerance() == pytest.approx(5 * (2 * np.pi / 64) ** 2)

    def test_shape_check(self):
        with pytest.raises(GridError):
            angular_average(np.zeros(7), AngularQuadrature(8))


class TestRadialGrid:
    def test_graded(self):
        g = RadialGrid.graded(30.0, 400)
        assert g.nodes[0] == 0 and g.length == 30.0 and g.nodes.size == 400
        assert g.widths[0] == pytest.approx(2e-3)
        assert np.all(np.diff(g.widths) > -1e-12)

    def test_refined(self):
        g = RadialGrid.uniform(1.0, 5)
        r = g.refined()
        assert r.nodes.size == 9 and np.allclose(r.widths, 0.125)

    def test_invalid(self):
        with pytest.raises(GridError):
            RadialGrid(np.array([0.0, 1.0, 0.5]))
        with pytest.raises(GridError):
            RadialGrid.graded(30.0, 5)


class TestDiskGrid:
    def test_build(self):
        g = DiskGrid.build(0.1, n_angles=16, n_theta=4)
        assert g.radii[-1] == 1.0 and g.radii[0] > 0
        assert 1 - g.radii[-2] == pytest.approx(1e-4)
        assert g.shape == (g.radii.size, 4, 16)

    def test_weights(self):
        g = DiskGrid.build(0.05, n_angles=16, n_theta=3)
        assert g.area_weights().sum() == pytest.approx(np.pi)
        assert g.phase_weights().sum() == pytest.approx(1.0)


def test_norms():
    assert sup_norm([-3, 2]) == 3.0
    assert sup_norm([]) == 0.0
    assert l2_norm(np.ones(4)) == pytest.approx(1.0)
