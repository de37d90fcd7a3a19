"""Angular quadrature, boundary-layer and disk grids, and discrete functionals."""

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class AngularQuadrature:
    """Midpoint rule on [-pi, pi) with ``n`` equal cells.

    ``n`` must be a multiple of 4 so that no node is grazing (``sin = 0``)
    or tangential-free (``cos = 0``).  The rule integrates ``cos(k phi)`` and
    ``sin(k phi)`` exactly for ``|k| < n``.
    """

    n_angles: int = 64
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n_angles)
        if n < 8 or n % 4:
            raise GridError("n_angles must be a multiple of 4 and at least 8")
        h = 2 * np.pi / n
        nodes = -np.pi + (np.arange(n) + 0.5) * h
        if np.any(np.abs(np.sin(nodes)) < 1e-14) or np.any(np.abs(np.cos(nodes)) < 1e-14):
            raise GridError("angular node on a grazing or normal direction")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", np.full(n, h))

    @property
    def spacing(self):
        return 2 * np.pi / self.n_angles

    @property
    def incoming(self):
        """Mask of nodes with ``sin(phi) > 0``."""
        return np.sin(self.nodes) > 0

    def half_range(self):
        """Incoming nodes in (0, pi) with their weights, ascending in angle."""
        m = self.incoming
        return self.nodes[m], self.weights[m]

    def tolerance(self):
        """Invariant tolerance ``5 (2 pi / n)^2`` used by the solver checks."""
        return 5.0 * self.spacing ** 2


def _last_axis(f, quad):
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != quad.n_angles:
        raise GridError(f"expected {quad.n_angles} angular values, got {f.shape[-1]}")
    return f


def angular_average(f, quad):
    """``(1/2pi) sum w_j f_j`` over the last axis."""
    f = _last_axis(f, quad)
    return f @ quad.weights / (2 * np.pi)


def inner(f, g, quad):
    """``<f, g> = int_{-pi}^{pi} f g dphi`` over the last axis (not normalised)."""
    f = _last_axis(f, quad)
    return (f * g) @ quad.weights


def half_moment_weights(quad):
    """Outgoing-flux weights ``-sin(phi) w_j`` on ``sin < 0``, normalised to sum 1.

    The exact half-range integral of ``-sin/2`` is 1; normalising the discrete
    weights keeps ``P c = c`` exact, at an O(h^2) cost on other integrands.
    """
    s = np.sin(quad.nodes)
    w = np.where(s < 0, -s * quad.weights, 0.0)
    return w / w.sum()


def half_moment(f, quad):
    """Diffusive-reflection moment ``P f = -1/2 int_{sin<0} f sin dphi``."""
    f = _last_axis(f, quad)
    return f @ half_moment_weights(quad)


def sup_norm(f):
    f = np.asarray(f, dtype=float)
    return float(np.max(np.abs(f))) if f.size else 0.0


def l2_norm(f, weights=None):
    """Weighted discrete L2 norm; ``weights`` broadcast against ``f``."""
    f = np.asarray(f, dtype=float)
    if weights is None:
        weights = np.full(f.shape, 1.0 / max(f.size, 1))
    return float(np.sqrt(np.sum(np.broadcast_to(weights, f.shape) * f * f)))


def _graded_steps(first, ratio, cap):
    steps = [first]
    while steps[-1] * ratio < cap:
        steps.append(steps[-1] * ratio)
    return np.array(steps)


@dataclass(frozen=True)
class RadialGrid:
    """Nodes on [0, L], geometric near ``eta = 0`` and uniform in the tail."""

    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 3 or x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise GridError("radial nodes must start at 0 and increase strictly")
        object.__setattr__(self, "nodes", x)

    @classmethod
    def graded(cls, length=30.0, n_eta=400, ratio=1.15, first=2e-3):
        if length <= 0 or n_eta < 8 or ratio < 1.0 or not 0 < first <= 1e-2:
            raise GridError("invalid radial grid parameters")
        n_cells = n_eta - 1
        lo, hi = first, length
        # tail spacing so that graded + uniform cells fill [0, L] exactly
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            steps = _graded_steps(first, ratio, mid) if ratio > 1 else np.array([first])
            rest = n_cells - len(steps)
            total = steps.sum() + rest * mid
            if rest < 1 or total > length:
                hi = mid
            else:
                lo = mid
        steps = _graded_steps(first, ratio, lo) if ratio > 1 else np.array([first])
        rest = n_cells - len(steps)
        if rest < 1:
            raise GridError("too few nodes for the requested grading")
        tail = (length - steps.sum()) / rest
        if tail < steps[-1]:
            raise GridError("too few nodes for the requested grading")
        widths = np.concatenate([steps, np.full(rest, tail)])
        nodes = np.concatenate([[0.0], np.cumsum(widths)])
        nodes[-1] = length
        return cls(nodes)

    @classmethod
    def uniform(cls, length, n_eta):
        return cls(np.linspace(0.0, length, n_eta))

    @property
    def length(self):
        return float(self.nodes[-1])

    @property
    def widths(self):
        return np.diff(self.nodes)

    @property
    def centers(self):
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    def refined(self):
        """Every cell split in two."""
        mids = self.centers
        x = np.empty(2 * self.nodes.size - 1)
        x[0::2] = self.nodes
        x[1::2] = mids
        return RadialGrid(x)


@dataclass(frozen=True)
class DiskGrid:
    """Polar grid on the unit disk with a velocity quadrature.

    Radii are graded toward the wall, the boundary ring ``r = 1`` is a node,
    and the innermost ring sits at half a spacing from the centre, so no
    ``(r, theta)`` pair is duplicated.  Velocity nodes are the angle ``phi``
    between the velocity and the local tangent.
    """

    radii: np.ndarray
    n_theta: int
    quad: AngularQuadrature

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r[-1] != 1.0 or r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise GridError("radii must increase strictly in (0, 1] and end at 1")
        if self.n_theta < 1:
            raise GridError("n_theta must be positive")
        object.__setattr__(self, "radii", r)

    @classmethod
    def build(cls, epsilon, n_angles=128, n_theta=1, first=1e-3, ratio=1.15,
              max_spacing=0.02):
        """Wall spacing ``first * epsilon`` growing by ``ratio`` up to ``max_spacing``."""
        steps = _graded_steps(first * epsilon, ratio, max_spacing)
        depth = np.concatenate([[0.0], np.cumsum(steps)])
        if depth[-1] < 1.0:
            n_tail = int(np.ceil((1.0 - depth[-1]) / max_spacing))
            tail = np.linspace(depth[-1], 1.0, n_tail + 1)[1:]
            depth = np.concatenate([depth, tail])
        depth = depth[depth < 1.0]
        gap = 1.0 - depth[-1]
        if gap < 0.5 * (depth[-1] - depth[-2]):
            depth = depth[:-1]
        r = np.sort(1.0 - depth)
        r[-1] = 1.0
        return cls(r, n_theta, AngularQuadrature(n_angles))

    @property
    def thetas(self):
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def shape(self):
        return (self.radii.size, self.n_theta, self.quad.n_angles)

    def area_weights(self):
        """Weights on (r, theta) summing to the disk area ``pi``."""
        r = self.radii
        edges = np.concatenate([[0.0], 0.5 * (r[1:] + r[:-1]), [1.0]])
        ring = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
        return np.repeat(ring[:, None] / self.n_theta, self.n_theta, axis=1)

    def phase_weights(self):
        """Weights on (r, theta, phi) normalised to total measure 1."""
        w = self.area_weights()[..., None] * self.quad.weights
        return w / w.sum()
