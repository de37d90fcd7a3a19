"""Composite asymptotic approximations and their comparison with the disk solver.

A composite is ``interior(x) + psi0(eps eta) (f(eta, phi) - f_inf)`` with the
layer profile ``f`` from a Milne problem: the classical one (no force) or the
one with geometric correction.  Order 1 adds ``eps (u1 + layer1)``.

Also here: the two point formulas at ``(eta, phi) = (n eps, eps)`` that
separate the classical and geometric layers, and the grazing-derivative
probes.
"""

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad as _quad
from scipy.interpolate import RegularGridInterpolator

from . import disk as _disk
from . import elliptic
from .discretization import AngularQuadrature, RadialGrid, half_moment_weights, l2_norm
from .geometry import GEOMETRIC, NONE, ForceField, paired_cutoffs
from .milne import (DIFFUSIVE, INFLOW, CompatibilityError, MilneProblem,
                    check_compatibility, solve_diffusive, solve_inflow)

CLASSICAL = "classical"
VARIANTS = (CLASSICAL, GEOMETRIC)
GRAZING_DEPTHS = (0.5, 1.0, 2.0)
WALL_SCALES = (0.125, 0.25, 0.5, 1.0)
CSV_COLUMNS = ("epsilon", "variant", "order", "sup_error", "l2_error")


class ExpansionRefused(ValueError):
    """The requested expansion is not constructed (theta-dependent order 1)."""


@dataclass
class ExpansionSpec:
    """``g(theta, phi)`` is the boundary datum on incoming angles ``sin(phi) > 0``.

    ``theta_independent`` declares that ``g`` does not depend on ``theta``;
    only then is order 1 built without ``acknowledge_theta_dependence``, and
    the classical variant never builds order 1 for theta-dependent data.
    """

    variant: str
    g: callable
    order: int = 0
    boundary_kind: str = INFLOW
    epsilon: float = 0.1
    theta_independent: bool = True
    acknowledge_theta_dependence: bool = False
    n_angles: int = 128
    n_eta: int = 400
    length: float = 30.0
    n_theta: int = 1
    smoothness: str = "C2_quintic"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.order not in (0, 1):
            raise ValueError("order must be 0 or 1")
        if self.boundary_kind not in (INFLOW, DIFFUSIVE):
            raise ValueError(f"unknown boundary kind {self.boundary_kind!r}")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.order == 1 and not self.theta_independent:
            if self.variant == CLASSICAL:
                raise ExpansionRefused("classical order 1 needs theta-independent data")
            if not self.acknowledge_theta_dependence:
                raise ExpansionRefused(
                    "order 1 with theta-dependent data requires acknowledge_theta_dependence")
        if not self.theta_independent and self.n_theta < 4:
            raise ValueError("theta-dependent data needs n_theta >= 4 slices")

    @property
    def force(self):
        mode = GEOMETRIC if self.variant == GEOMETRIC else NONE
        psi, _ = paired_cutoffs(self.smoothness)
        return ForceField(self.epsilon, psi, mode)

    @property
    def psi(self):
        return paired_cutoffs(self.smoothness)[0]

    @property
    def psi0(self):
        return paired_cutoffs(self.smoothness)[1]

    @property
    def slab_length(self):
        # the layer must reach the end of the psi0 support
        return max(self.length, 1.05 * self.psi0.support_end / self.epsilon)

    @property
    def thetas(self):
        n = 1 if self.theta_independent else self.n_theta
        return 2 * np.pi * np.arange(n) / n

    def milne_problem(self, h, source=None, kind=INFLOW):
        grid = RadialGrid.graded(self.slab_length, self.n_eta)
        return MilneProblem(self.force, h, source=source, boundary_kind=kind, grid=grid,
                            quad=AngularQuadrature(self.n_angles))


# -- layers -------------------------------------------------------------------

@dataclass
class Layer:
    """Cut-off boundary layers ``psi0 (f_j - f_inf_j)`` on theta slices."""

    thetas: np.ndarray
    solutions: list
    f_inf: np.ndarray
    epsilon: float
    psi0: object

    def _slice(self, j, eta, phi):
        sol = self.solutions[j]
        out = np.zeros(np.broadcast(eta, phi).shape)
        cut = self.psi0(self.epsilon * eta)
        live = np.broadcast_to(cut > 0, out.shape)
        if np.any(live):
            e = np.broadcast_to(eta, out.shape)[live]
            p = np.broadcast_to(phi, out.shape)[live]
            out[live] = np.broadcast_to(cut, out.shape)[live] * (sol.evaluate(e, p) - self.f_inf[j])
        return out

    def __call__(self, eta, theta, phi):
        eta, theta, phi = np.broadcast_arrays(*(np.asarray(a, float) for a in (eta, theta, phi)))
        n = self.thetas.size
        if n == 1:
            return self._slice(0, eta, phi)
        # periodic linear interpolation between slices
        s = np.mod(theta, 2 * np.pi) / (2 * np.pi) * n
        j0 = np.floor(s).astype(int) % n
        t = s - np.floor(s)
        out = np.zeros(eta.shape)
        for j in range(n):
            for idx, wgt in ((j0 == j, 1 - t), ((j0 + 1) % n == j, t)):
                m = idx & (wgt > 0)
                if np.any(m):
                    out[m] += wgt[m] * self._slice(j, eta[m], phi[m])
        return out

    def on_milne_grid(self):
        """Slice arrays ``psi0 (f - f_inf)`` on (eta nodes, phi nodes): shape (n_theta, n_eta, n_phi)."""
        out = []
        for j, sol in enumerate(self.solutions):
            cut = self.psi0(self.epsilon * sol.eta)
            out.append(cut[:, None] * (sol.f - self.f_inf[j]))
        return np.array(out)


def _periodic_interpolant(eta, phi, values):
    """Bilinear interpolant in (eta, phi), periodic in phi, zero beyond the last eta."""
    ph = np.concatenate([[phi[-1] - 2 * np.pi], phi, [phi[0] + 2 * np.pi]])
    v = np.concatenate([values[:, -1:], values, values[:, :1]], axis=1)
    rgi = RegularGridInterpolator((eta, ph), v, bounds_error=False, fill_value=0.0)

    def f(e, p):
        e, p = np.broadcast_arrays(np.asarray(e, float), np.asarray(p, float))
        pw = np.mod(p + np.pi, 2 * np.pi) - np.pi
        pw = np.clip(pw, ph[0], ph[-1])
        return rgi(np.stack([e, pw], axis=-1))
    return f


def _phi_derivative(values, phi):
    """Centred periodic difference along the last axis."""
    h = phi[1] - phi[0]
    return (np.roll(values, -1, axis=-1) - np.roll(values, 1, axis=-1)) / (2 * h)


def _theta_derivative(values):
    """Spectral derivative across theta slices (axis 0)."""
    n = values.shape[0]
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    c = np.fft.fft(values, axis=0)
    shape = (n,) + (1,) * (values.ndim - 1)
    return np.real(np.fft.ifft(1j * k.reshape(shape) * c, axis=0))


def _solve_slices(spec, data, sources=None, kind=INFLOW):
    """One Milne solve per theta slice; ``data[j]`` maps phi to boundary values."""
    sols = []
    for j in range(len(data)):
        src = None if sources is None else sources[j]
        prob = spec.milne_problem(data[j], src, kind)
        if kind == DIFFUSIVE:
            sols.append(solve_diffusive(prob))
        else:
            sols.append(solve_inflow(prob))
    return sols


# -- composite ----------------------------------------------------------------

@dataclass
class CompositeField:
    """``u0 + layer0`` (order 0) plus ``eps (u1 + layer1)`` (order 1)."""

    spec: ExpansionSpec
    interior0: object
    layer0: Layer = None
    interior1: object = None
    layer1: Layer = None
    flags: list = field(default_factory=list)

    def interior(self, r, theta, phi):
        r, theta, phi = np.broadcast_arrays(*(np.asarray(a, float) for a in (r, theta, phi)))
        out = self.interior0(r, theta)
        if self.spec.order == 1:
            out = out + self.spec.epsilon * self._u1(r, theta, phi)
        return out

    def _u1(self, r, theta, phi):
        # u1 = ubar1 - w . grad u0
        out = self.interior1(r, theta) if self.interior1 is not None else np.zeros(r.shape)
        x = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        grad = elliptic.gradient(self.interior0, x)
        w = _disk.velocity(theta, phi)
        return out - np.sum(w * grad, axis=-1)

    def evaluate(self, r, theta, phi):
        r, theta, phi = np.broadcast_arrays(*(np.asarray(a, float) for a in (r, theta, phi)))
        eps = self.spec.epsilon
        eta = (1.0 - r) / eps
        out = self.interior(r, theta, phi)
        if self.layer0 is not None:
            out = out + self.layer0(eta, theta, phi)
        if self.layer1 is not None:
            out = out + eps * self.layer1(eta, theta, phi)
        return out

    def on_grid(self, grid):
        R, T, P = np.meshgrid(grid.radii, grid.thetas, grid.quad.nodes, indexing="ij")
        return self.evaluate(R, T, P)


def _boundary_samples(spec, theta):
    """``phi -> g(theta, phi)`` for one slice."""
    return lambda p, t=theta: np.asarray(spec.g(np.full(np.shape(p), t), p), dtype=float)


def _incoming_flux(h):
    """``(1/pi) int_0^pi h(phi) sin(phi) dphi``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val = _quad(lambda p: float(np.asarray(h(np.array([p])))[0]) * np.sin(p), 0.0, np.pi,
                    epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    return val / np.pi


def _fourier(values, n_keep=None):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size == 1:
        return elliptic.FourierBoundaryData.constant(values[0])
    return elliptic.FourierBoundaryData.from_samples(values, n_keep)


def build_composite(spec):
    """Order-0 (and optionally order-1) composite for ``spec``."""
    thetas = spec.thetas
    data = [_boundary_samples(spec, t) for t in thetas]
    if spec.boundary_kind == DIFFUSIVE:
        return _build_diffusive(spec, thetas, data)

    sols0 = _solve_slices(spec, data)
    finf0 = np.array([s.f_infinity for s in sols0])
    u0 = elliptic.solve_laplace_dirichlet(_fourier(finf0))
    layer0 = Layer(thetas, sols0, finf0, spec.epsilon, spec.psi0)
    comp = CompositeField(spec, u0, layer0)
    for s in sols0:
        comp.flags.extend(s.flags)
    if spec.order == 0:
        return comp

    # order 1: boundary datum w . grad u0 at the wall, source from d/dtheta of layer0
    sources = _order1_sources(spec, layer0)
    data1 = [_wall_gradient_datum(u0, t) for t in thetas]
    sols1 = _solve_slices(spec, data1, sources)
    finf1 = np.array([s.f_infinity for s in sols1])
    comp.interior1 = elliptic.solve_laplace_dirichlet(_fourier(finf1))
    comp.layer1 = Layer(thetas, sols1, finf1, spec.epsilon, spec.psi0)
    if not spec.theta_independent:
        comp.flags.append("theta-dependence-acknowledged")
    return comp


def _wall_gradient_datum(u0, theta):
    def h(p):
        p = np.asarray(p, dtype=float)
        x = np.stack([np.cos(theta) + 0 * p, np.sin(theta) + 0 * p], axis=-1)
        return np.sum(_disk.velocity(theta, p) * elliptic.gradient(u0, x), axis=-1)
    return h


def _order1_sources(spec, layer0):
    """``psi(eps eta) / (1 - eps eta) cos(phi) d(layer0)/dtheta`` per slice.

    In the geometric frame ``d/dtheta`` is taken at fixed ``phi`` and vanishes
    for theta-independent data.  In the classical frame the velocity angle is
    fixed in space, so ``d/dtheta`` picks up ``d/dphi`` of the layer.
    """
    sol = layer0.solutions[0]
    eta, phi = sol.eta, sol.phi
    vals = layer0.on_milne_grid()
    if spec.variant == CLASSICAL:
        deriv = _phi_derivative(vals, phi)
    elif spec.theta_independent:
        return None
    else:
        deriv = _theta_derivative(vals)
    eps = spec.epsilon
    with np.errstate(divide="ignore"):
        weight = np.where(eps * eta < 1, spec.psi(np.minimum(eps * eta, 0.999)) / (1 - eps * eta),
                          0.0)
    out = []
    for d in deriv:
        table = weight[:, None] * np.cos(phi)[None, :] * d
        out.append(_periodic_interpolant(eta, phi, table))
    return out


def _build_diffusive(spec, thetas, data):
    """Diffusive boundary: layer0 vanishes and u0 solves a Neumann problem."""
    neumann = np.array([_incoming_flux(h) for h in data])
    u0 = elliptic.solve_modified_helmholtz_neumann(_fourier(neumann))
    comp = CompositeField(spec, u0, None)
    if spec.order == 0:
        return comp
    # g1 = w . grad u0 - P(w . grad u0) + g on each slice, with P f1(0) = 0
    quad = AngularQuadrature(spec.n_angles)
    wts = half_moment_weights(quad)
    data1 = []
    for t, h in zip(thetas, data):
        grad_term = _wall_gradient_datum(u0, t)
        p_val = float(grad_term(quad.nodes) @ wts)
        data1.append(lambda p, gt=grad_term, pv=p_val, hh=h: gt(p) - pv + hh(p))
    sols1 = _solve_slices(spec, data1, None, DIFFUSIVE)
    finf1 = np.array([s.f_infinity for s in sols1])
    layer1 = Layer(thetas, sols1, finf1, spec.epsilon, spec.psi0)
    # Neumann datum of ubar1 from d/dtheta of layer1 (zero for theta-independent data)
    if spec.theta_independent:
        u1 = None
    else:
        sol = sols1[0]
        eps = spec.epsilon
        vals = _theta_derivative(layer1.on_milne_grid())
        weight = (np.exp(-spec.force.potential(sol.eta)) * spec.psi(eps * sol.eta)
                  / (1 - np.minimum(eps * sol.eta, 0.999)))
        inner = (vals * np.cos(sol.phi)) @ quad.weights
        flux = np.trapezoid(weight * inner, sol.eta, axis=-1) / np.pi
        u1 = elliptic.solve_modified_helmholtz_neumann(_fourier(flux))
        comp.flags.append("theta-dependence-acknowledged")
    comp.interior1 = u1
    comp.layer1 = layer1
    for s in sols1:
        comp.flags.extend(s.flags)
    return comp


# -- error reports --------------------------------------------------------------

@dataclass
class ExpansionReport:
    spec: ExpansionSpec
    composite: np.ndarray        # on the reference DiskGrid
    remainder: np.ndarray        # reference - composite
    sup_error: float
    l2_error: float
    layer_zoom: list             # (eta, max error over the ring)
    grazing: list                # (eta, r, theta, phi, reference, composite, error)
    interpolation_error: float = 0.0
    flags: list = field(default_factory=list)

    def row(self):
        return {"epsilon": self.spec.epsilon, "variant": self.spec.variant,
                "order": self.spec.order, "sup_error": self.sup_error,
                "l2_error": self.l2_error}

    def to_dict(self):
        out = self.row()
        out.update(layer_zoom=[list(map(float, z)) for z in self.layer_zoom],
                   grazing=[list(map(float, z)) for z in self.grazing],
                   interpolation_error=self.interpolation_error, flags=list(self.flags),
                   boundary_kind=self.spec.boundary_kind)
        return out


def grazing_points(epsilon, depths=GRAZING_DEPTHS, wall_scales=WALL_SCALES):
    """Phase points on the ``eps`` scale near grazing, as ``(eta, phi)`` arrays.

    Inward points ``(n eps, eps)`` and outgoing wall points ``(0, -c eps)``.
    A fixed angular grid cannot see the O(eps)-wide grazing band, so the
    error set is rescaled with ``eps`` instead.
    """
    n = np.asarray(depths, dtype=float)
    c = np.asarray(wall_scales, dtype=float)
    eta = np.concatenate([n * epsilon, np.zeros(c.size)])
    phi = np.concatenate([np.full(n.size, epsilon), -c * epsilon])
    return eta, phi


def error_report(spec, reference, composite=None, eta_max=10.0):
    """Sup and L2 errors of the composite against a disk reference field.

    Errors are taken over all reference nodes.  For in-flow data the sup also
    covers the points of :func:`grazing_points`, where the reference is
    evaluated by characteristics rather than read off the grid.
    """
    grid = reference.problem.grid
    if abs(reference.problem.epsilon - spec.epsilon) > 1e-14:
        raise ValueError("reference and spec use different epsilon")
    if composite is None:
        composite = build_composite(spec)
    flags = list(composite.flags)
    values = composite.on_grid(grid)
    interp_err = 0.0
    if not spec.theta_independent:
        slices = composite.spec.thetas
        if slices.size != grid.n_theta or np.any(np.abs(slices - grid.thetas) > 1e-12):
            interp_err = _interpolation_estimate(composite, grid)
            flags.append("resampled")
    remainder = reference.u - values
    err = np.abs(remainder)
    sup = float(err.max())
    l2 = l2_norm(remainder, grid.phase_weights())
    eta = (1 - grid.radii) / spec.epsilon
    zoom = [(float(eta[i]), float(err[i].max())) for i in np.argsort(eta) if eta[i] <= eta_max]
    graze = []
    if spec.boundary_kind == INFLOW:
        eta_g, phi = grazing_points(spec.epsilon)
        r = 1.0 - spec.epsilon * eta_g
        for th in grid.thetas:
            th_g = np.full(r.size, th)
            ref = reference.evaluate(r, th_g, phi)
            cmp_ = composite.evaluate(r, th_g, phi)
            for k in range(r.size):
                graze.append((eta_g[k], r[k], th, phi[k], ref[k], cmp_[k],
                              abs(ref[k] - cmp_[k])))
        if graze:
            sup = max(sup, max(z[-1] for z in graze))
    return ExpansionReport(spec, values, remainder, sup, l2, zoom, graze, interp_err, flags)


def _interpolation_estimate(composite, grid):
    """Linear slice interpolation vs trigonometric interpolation of the layer."""
    vals = composite.layer0.on_milne_grid() if composite.layer0 is not None else None
    if vals is None:
        return 0.0
    n = vals.shape[0]
    c = np.fft.fft(vals, axis=0) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    worst = 0.0
    for th in grid.thetas:
        trig = np.real(np.tensordot(np.exp(1j * k * th), c, axes=(0, 0)))
        s = np.mod(th, 2 * np.pi) / (2 * np.pi) * n
        j0 = int(np.floor(s)) % n
        t = s - np.floor(s)
        linear = (1 - t) * vals[j0] + t * vals[(j0 + 1) % n]
        worst = max(worst, float(np.max(np.abs(trig - linear))))
    return worst


@dataclass
class SweepResult:
    rows: list
    reports: list
    monotone: dict

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v)
                        for k, v in row.items()})
        return buf.getvalue()


def epsilon_sweep(make_spec, epsilons, references, variants=VARIANTS):
    """Reports for each ``(variant, eps)``; ``references[eps]`` is a DiskField.

    ``monotone[variant]`` audits whether sup errors decrease with eps.
    """
    rows, reports, monotone = [], [], {}
    for v in variants:
        sups = []
        for eps in sorted(epsilons, reverse=True):
            rep = error_report(make_spec(v, eps), references[eps])
            reports.append(rep)
            rows.append(rep.row())
            sups.append(rep.sup_error)
        monotone[v] = bool(np.all(np.diff(sups) <= 0))
    return SweepResult(rows, reports, monotone)


def loglog_slope(epsilons, errors):
    """Least-squares slope of log(error) against log(eps)."""
    x = np.log(np.asarray(epsilons, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# -- point formulas --------------------------------------------------------------

def flat_weight(n):
    return float(np.exp(-n))


def geometric_weight(n):
    return float(np.exp(1.0 - np.sqrt(1.0 + 2.0 * n)))


def point_formula_flat(n, ubar0, G, epsilon):
    """``(1 - e^-n) ubar0 + e^-n G(eps)``."""
    w = flat_weight(n)
    return (1.0 - w) * ubar0 + w * float(G(epsilon))


def point_formula_geometric(n, Ubar0, G, epsilon):
    """``(1 - e^{1 - s}) Ubar0 + e^{1 - s} G(s eps)`` with ``s = sqrt(1 + 2n)``."""
    w = geometric_weight(n)
    return (1.0 - w) * Ubar0 + w * float(G(np.sqrt(1.0 + 2.0 * n) * epsilon))


@dataclass
class PointFormulaRow:
    epsilon: float
    n: float
    u_solved: float
    u_formula: float
    U_solved: float
    U_formula: float
    ubar0: float
    Ubar0: float

    @property
    def residual_flat(self):
        return abs(self.u_solved - self.u_formula)

    @property
    def residual_geometric(self):
        return abs(self.U_solved - self.U_formula)

    @property
    def gap(self):
        return abs(self.U_solved - self.u_solved)

    @property
    def floor(self):
        """Half the weight gap times the distance of the averages from G(0)."""
        return 0.5 * abs(geometric_weight(self.n) - flat_weight(self.n)) * abs(
            3.0 - 0.5 * (self.ubar0 + self.Ubar0))

    def to_dict(self):
        d = dict(self.__dict__)
        d.update(residual_flat=self.residual_flat, residual_geometric=self.residual_geometric,
                 gap=self.gap, floor=self.floor)
        return d


def verify_point_formulas(epsilons, depths, G=None, n_angles=128, n_eta=400, length=30.0):
    """Milne values at ``(n eps, eps)`` against both point formulas."""
    G = (lambda p: np.cos(p) + 2.0) if G is None else G
    rows = []
    for eps in epsilons:
        sols = {}
        for mode in (NONE, GEOMETRIC):
            prob = MilneProblem(ForceField(eps, mode=mode), G,
                                grid=RadialGrid.graded(length, n_eta),
                                quad=AngularQuadrature(n_angles))
            sols[mode] = solve_inflow(prob)
        ub = float(sols[NONE].fbar(0.0))
        Ub = float(sols[GEOMETRIC].fbar(0.0))
        for n in depths:
            u = float(sols[NONE].evaluate(n * eps, eps))
            U = float(sols[GEOMETRIC].evaluate(n * eps, eps))
            rows.append(PointFormulaRow(eps, n, u, point_formula_flat(n, ub, G, eps),
                                        U, point_formula_geometric(n, Ub, G, eps), ub, Ub))
    return rows


def far_field_gap(G, epsilons, n_angles=128, n_eta=400, length=30.0):
    """``|f_inf(geometric) - f_inf(classical)|`` for each eps."""
    out = []
    for eps in epsilons:
        vals = []
        for mode in (NONE, GEOMETRIC):
            prob = MilneProblem(ForceField(eps, mode=mode), G,
                                grid=RadialGrid.graded(length, n_eta),
                                quad=AngularQuadrature(n_angles))
            vals.append(solve_inflow(prob).f_infinity)
        out.append(abs(vals[1] - vals[0]))
    return np.array(out)


# -- grazing probes --------------------------------------------------------------

@dataclass
class ProbeRow:
    n_angles: int
    phi_min: float
    fbar0: float
    f0: float
    derivative: float        # |fbar(0) - f(0, phi_min)| / sin(phi_min)
    growth: float = float("nan")

    def to_dict(self):
        return dict(self.__dict__)


def _default_probe_data(p):
    return np.cos(3 * np.asarray(p, dtype=float))


def grazing_probe(g=None, levels=5, n_start=32, kind=INFLOW, n_eta=200, length=20.0,
                  epsilon=0.1):
    """Wall derivative ``d f / d eta`` at the incoming node nearest to grazing.

    Classical Milne problems on angular grids doubling from ``n_start``;
    the node nearest to ``phi = 0+`` is ``pi / n``.
    """
    g = _default_probe_data if g is None else g
    rows = []
    for lev in range(levels):
        n = n_start * 2 ** lev
        prob = MilneProblem(ForceField(epsilon, mode=NONE), g, boundary_kind=kind,
                            grid=RadialGrid.graded(length, n_eta),
                            quad=AngularQuadrature(n))
        sol = solve_diffusive(prob) if kind == DIFFUSIVE else solve_inflow(prob)
        phi_min = np.pi / n
        j = int(np.argmin(np.abs(sol.phi - phi_min)))
        fbar0 = float(sol.q[0])
        f0 = float(sol.f[0, j])
        rows.append(ProbeRow(n, float(sol.phi[j]), fbar0, f0,
                             abs(fbar0 - f0) / np.sin(sol.phi[j])))
    for a, b in zip(rows, rows[1:]):
        b.growth = b.derivative / a.derivative if a.derivative > 0 else float("nan")
    return rows


def grazing_probe_diffusive(g=None, **kw):
    """The same probe for the diffusive boundary; incompatible data are rejected."""
    g = _default_probe_data if g is None else g
    prob = MilneProblem(ForceField(kw.get("epsilon", 0.1), mode=NONE), g,
                        boundary_kind=DIFFUSIVE)
    comp = check_compatibility(prob)
    if not comp.passed:
        raise CompatibilityError(comp.defect, comp.tolerance)
    return grazing_probe(g, kind=DIFFUSIVE, **kw)
