"""Reference kinetic solver for steady transport in the unit disk.

Solves ``eps w . grad u + sigma u - u_bar = 0`` with in-flow data ``u = g`` or
the diffusive condition ``u = P u + eps g`` on the incoming boundary.  Each
node value is written in Duhamel form along the straight backward chord,

    u(x, w) = B exp(-sigma t_b) + int_0^{t_b} exp(-sigma t) u_bar(x - eps t w) dt,

with ``u_bar`` interpolated on the polar grid.  The grid is invariant under
rotation by ``2 pi / n_theta``, so the averaged operator is block circulant
and is solved mode by mode after a discrete Fourier transform in ``theta``.

Velocities are labelled by the angle ``phi`` to the local tangent:
``w = -sin(phi) x_hat - cos(phi) tau_hat``, so ``sin(phi) > 0`` is incoming
at the wall, matching the boundary-layer convention.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .discretization import DiskGrid, half_moment_weights

INFLOW = "inflow"
DIFFUSIVE = "diffusive"

_GL4 = np.polynomial.legendre.leggauss(4)
_GL4 = ((_GL4[0] + 1) / 2, _GL4[1] / 2)
PANEL_DEPTH = 0.5   # optical depth per uniform panel
TRUNCATION = 40.0   # chords are cut at optical depth 40 (weight e^-40)


class DiskError(RuntimeError):
    pass


class DiskConvergenceError(DiskError):
    def __init__(self, message, history=(), contraction=None):
        super().__init__(message)
        self.history = list(history)
        self.contraction = contraction


class DomainError(ValueError):
    pass


def exit_time(x, w, epsilon):
    """Backward exit time ``t_b`` with ``|x - eps t_b w| = 1``."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    if np.any(r2 > (1 + 1e-12) ** 2):
        raise DomainError("point outside the unit disk")
    xw = np.sum(x * w, axis=-1)
    disc = np.maximum(xw * xw - r2 + 1.0, 0.0)
    out = np.maximum(xw + np.sqrt(disc), 0.0) / epsilon
    return float(out) if out.ndim == 0 else out


def velocity(theta, phi):
    """Cartesian velocity for tangent angle ``phi`` at polar angle ``theta``."""
    return np.stack([-np.sin(phi - theta), -np.cos(phi - theta)], axis=-1)


@dataclass
class DiskProblem:
    """``g(theta, phi)`` is evaluated on incoming angles ``sin(phi) > 0``."""

    epsilon: float
    g: callable
    boundary_kind: str = INFLOW
    grid: DiskGrid = None
    theta_independent: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.boundary_kind not in (INFLOW, DIFFUSIVE):
            raise ValueError(f"unknown boundary kind {self.boundary_kind!r}")
        if self.grid is None:
            self.grid = DiskGrid.build(self.epsilon)

    @property
    def sigma(self):
        """Total cross-section: 1, or ``1 + eps^2`` with diffusive reflection."""
        return 1.0 + self.epsilon ** 2 if self.boundary_kind == DIFFUSIVE else 1.0


@dataclass
class DiskField:
    problem: DiskProblem
    u: np.ndarray          # (n_r, n_theta, n_angles)
    u_bar: np.ndarray      # (n_r, n_theta)
    iterations: int
    residual: float
    boundary_moment: np.ndarray = None
    audit: dict = field(default_factory=dict)
    solver: object = field(default=None, repr=False)

    def evaluate(self, r, theta, phi):
        """Point values ``u(x, w)`` by Duhamel post-processing of ``u_bar``."""
        return self.solver.evaluate(self.u_bar, self.boundary_moment, r, theta, phi)

    def to_dict(self):
        g = self.problem.grid
        return {
            "epsilon": self.problem.epsilon,
            "boundary_kind": self.problem.boundary_kind,
            "radii": g.radii.tolist(),
            "thetas": g.thetas.tolist(),
            "phi": g.quad.nodes.tolist(),
            "u_bar": self.u_bar.tolist(),
            "u": self.u.tolist(),
            "iterations": self.iterations,
            "residual": self.residual,
            "audit": dict(self.audit),
        }


class _Interp:
    """Bilinear (r, theta) interpolation weights on the polar grid."""

    def __init__(self, grid):
        self.radii = grid.radii
        self.n_theta = grid.n_theta

    def weights(self, rho, theta):
        """Return (columns, weights) with 4 entries per point.

        Columns index ``i * n_theta + j``.  Inside the innermost ring the value
        is blended with the ring mean, which is spread over every theta node.
        """
        radii, nt = self.radii, self.n_theta
        rho = np.minimum(rho, 1.0)
        k = np.clip(np.searchsorted(radii, rho) - 1, 0, radii.size - 2)
        a = np.clip((rho - radii[k]) / (radii[k + 1] - radii[k]), 0.0, 1.0)
        inner = rho < radii[0]
        k = np.where(inner, 0, k)
        a = np.where(inner, 0.0, a)
        s = (theta % (2 * np.pi)) * nt / (2 * np.pi)
        j0 = np.floor(s).astype(int) % nt
        b = s - np.floor(s)
        j1 = (j0 + 1) % nt
        cols = np.stack([k * nt + j0, k * nt + j1, (k + 1) * nt + j0, (k + 1) * nt + j1], -1)
        wts = np.stack([(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b], -1)
        if np.any(inner) and nt > 1:
            lam = rho[inner] / radii[0]
            wts[inner] *= lam[..., None]
            return cols, wts, inner, 1.0 - np.where(inner, rho / radii[0], 1.0)
        return cols, wts, inner, None


class DiskSolver:
    """Chord quadrature and the averaged operator for one problem."""

    def __init__(self, problem):
        self.problem = problem
        self.grid = problem.grid
        self.eps = problem.epsilon
        self.sigma = problem.sigma
        self.interp = _Interp(self.grid)
        self.n_r = self.grid.radii.size
        self.n_theta = self.grid.n_theta
        self.n_cols = self.n_r * self.n_theta
        self.diffusive = problem.boundary_kind == DIFFUSIVE
        self.clamped = 0

    # -- chords ---------------------------------------------------------------
    def chords(self, r, theta, phi):
        """Quadrature of every backward chord from ``(r, theta)`` along ``phi``.

        Returns a dict with the dense matrix ``M`` (points x columns) mapping
        ``u_bar`` to the volume part, the boundary weight ``exp(-sigma t_b)``,
        the hit angle ``theta_b`` and the boundary velocity angle ``phi_b``.
        """
        r, theta, phi = np.broadcast_arrays(*(np.asarray(v, float).ravel() for v in (r, theta, phi)))
        eps, sig = self.eps, self.sigma
        npt = r.size
        x = np.stack([r * np.cos(theta), r * np.sin(theta)], -1)
        w = velocity(theta, phi)
        tb = exit_time(x, w, eps)
        T = np.minimum(tb, TRUNCATION / sig)
        # breakpoints: uniform optical panels plus crossings of every ring
        n_uni = int(np.ceil(TRUNCATION / PANEL_DEPTH))
        uni = np.linspace(0.0, 1.0, n_uni + 1)[None, :] * (TRUNCATION / sig)
        s = r * np.sin(phi)   # -(x . w)
        c2 = (r * np.cos(phi)) ** 2
        rm = self.grid.radii[None, :]
        disc = rm ** 2 - c2[:, None]
        root = np.sqrt(np.maximum(disc, 0.0))
        cross = np.concatenate([(-s[:, None] - root), (-s[:, None] + root)], 1) / eps
        cross = np.where(np.concatenate([disc, disc], 1) > 0, cross, 0.0)
        br = np.concatenate([uni.repeat(npt, 0), cross, T[:, None]], 1)
        br = np.clip(br, 0.0, T[:, None])
        br.sort(axis=1)
        a, b = br[:, :-1], br[:, 1:]
        xg, wg = _GL4
        t = a[..., None] + (b - a)[..., None] * xg
        wt = (b - a)[..., None] * wg * np.exp(-sig * t)
        t, wt = t.reshape(npt, -1), wt.reshape(npt, -1)
        exact = -np.expm1(-sig * T) / sig
        tot = wt.sum(1)
        wt *= np.where(tot > 0, exact / np.where(tot > 0, tot, 1.0), 0.0)[:, None]
        px = x[:, None, :] - eps * t[..., None] * w[:, None, :]
        rho = np.hypot(px[..., 0], px[..., 1])
        if np.any(rho > 1 + 1e-9):
            self.clamped += int(np.count_nonzero(rho > 1 + 1e-9))
        th = np.arctan2(px[..., 1], px[..., 0])
        cols, wts, inner, blend = self.interp.weights(rho, th)
        rows = np.repeat(np.arange(npt), t.shape[1])
        M = np.zeros((npt, self.n_cols))
        vals = wts * wt[..., None]
        flat = rows[:, None] * self.n_cols + cols.reshape(-1, 4)
        M += np.bincount(flat.ravel(), vals.reshape(-1), npt * self.n_cols).reshape(npt, -1)
        if blend is not None:
            # ring-mean share inside the innermost ring
            share = np.where(inner, blend, 0.0) * wt
            per_pt = share.sum(1) / self.n_theta
            M[:, : self.n_theta] += per_pt[:, None]
        xb = x - eps * tb[:, None] * w
        theta_b = np.arctan2(xb[:, 1], xb[:, 0])
        nb = xb / np.hypot(xb[:, 0], xb[:, 1])[:, None]
        taub = np.stack([-nb[:, 1], nb[:, 0]], -1)
        phi_b = np.arctan2(-np.sum(w * nb, -1), -np.sum(w * taub, -1))
        bw = np.where(tb * sig < TRUNCATION, np.exp(-sig * tb), 0.0)
        return {"M": M, "bw": bw, "theta_b": theta_b, "phi_b": phi_b, "tb": tb}

    def boundary_columns(self, theta_b):
        """Periodic linear interpolation of boundary-node values at ``theta_b``."""
        nt = self.n_theta
        s = (theta_b % (2 * np.pi)) * nt / (2 * np.pi)
        j0 = np.floor(s).astype(int) % nt
        b = s - np.floor(s)
        return j0, (j0 + 1) % nt, 1 - b, b

    # -- assembly -------------------------------------------------------------
    def assemble(self):
        """Block row at ``theta = 0`` and the data vector for every theta node.

        ``K0[i, col]`` couples node (i, 0) to column ``col``; the boundary
        moments ``p_j`` (diffusive) are appended after the volume columns.
        """
        g = self.grid
        quad = g.quad
        phi = quad.nodes
        na = phi.size
        nr, nt = self.n_r, self.n_theta
        wavg = quad.weights / (2 * np.pi)
        extra = nt if self.diffusive else 0
        K0 = np.zeros((nr + (1 if self.diffusive else 0), self.n_cols + extra))
        rhs = np.zeros((nr + (1 if self.diffusive else 0), nt))
        self.ring = []
        thetas = g.thetas
        hw = half_moment_weights(quad)
        for i, r in enumerate(g.radii):
            ch = self.chords(np.full(na, r), np.zeros(na), phi)
            K0[i, : self.n_cols] = wavg @ ch["M"]
            B = np.zeros((na, extra))
            if self.diffusive:
                j0, j1, c0, c1 = self.boundary_columns(ch["theta_b"])
                np.add.at(B, (np.arange(na), j0), c0 * ch["bw"])
                np.add.at(B, (np.arange(na), j1), c1 * ch["bw"])
                K0[i, self.n_cols:] = wavg @ B
            # data term for every theta node (rotate the hit point)
            gvals = self._data(thetas[None, :] + ch["theta_b"][:, None], ch["phi_b"][:, None])
            scale = self.eps if self.diffusive else 1.0
            rhs[i] = scale * (wavg * ch["bw"]) @ gvals
            self.ring.append({"M": ch["M"], "B": B, "bw": ch["bw"], "gvals": gvals})
        if self.diffusive:
            # p_0 = P u(1, theta_0): outgoing half moment at the wall node
            last = self.ring[-1]
            K0[nr, : self.n_cols] = hw @ last["M"]
            K0[nr, self.n_cols:] = hw @ last["B"]
            rhs[nr] = self.eps * (hw * last["bw"]) @ last["gvals"]
        self.K0, self.rhs = K0, rhs
        return K0, rhs

    def _data(self, theta, phi):
        # hits with sin(phi_b) <= 0 only occur for truncated or tangent chords
        g = self.problem.g
        vals = np.asarray(g(np.broadcast_to(theta, np.broadcast(theta, phi).shape),
                            np.broadcast_to(phi, np.broadcast(theta, phi).shape)), dtype=float)
        return vals

    # -- block-circulant algebra ------------------------------------------------
    def _blocks(self):
        """Fourier symbols ``K_hat[k]`` of shape (n_theta, n, n)."""
        nr, nt = self.n_r, self.n_theta
        nb = nr + (1 if self.diffusive else 0)
        K0 = self.K0
        # reorganise columns into (block index, theta offset)
        vol = K0[:, : self.n_cols].reshape(nb, nr, nt)
        parts = [vol]
        if self.diffusive:
            parts.append(K0[:, self.n_cols:].reshape(nb, 1, nt))
        C = np.concatenate(parts, axis=1)        # (nb, nb, nt), offset m
        # out_j = sum_m C_m x_{j+m}  =>  symbol sum_m C_m exp(+2 pi i m k / n)
        return np.transpose(np.fft.ifft(C, axis=-1) * nt, (2, 0, 1))

    def apply(self, x):
        """``K x`` for a block vector ``x`` of shape (nb, n_theta)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        C = self._circ
        for m in range(self.n_theta):
            out += C[:, :, m] @ np.roll(x, -m, axis=1)
        return out

    def solve_direct(self):
        nt = self.n_theta
        Kh = self._blocks()
        bh = np.fft.fft(self.rhs, axis=1)
        nb = self.rhs.shape[0]
        xh = np.empty((nb, nt), dtype=complex)
        eye = np.eye(nb)
        for k in range(nt):
            xh[:, k] = np.linalg.solve(eye - Kh[k], bh[:, k])
        return np.real(np.fft.ifft(xh, axis=1))

    # -- post-processing ------------------------------------------------------
    def node_values(self, ubar, p):
        nr, nt = self.n_r, self.n_theta
        na = self.grid.quad.n_angles
        u = np.empty((nr, nt, na))
        for i, ring in enumerate(self.ring):
            scale = self.eps if self.diffusive else 1.0
            for j in range(nt):
                rolled = np.roll(ubar, -j, axis=1).reshape(-1)
                vals = ring["M"] @ rolled + scale * ring["bw"] * ring["gvals"][:, j]
                if self.diffusive:
                    vals = vals + ring["B"] @ np.roll(p, -j)
                u[i, j] = vals
        return u

    def evaluate(self, ubar, p, r, theta, phi):
        r, theta, phi = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float),
                                            np.asarray(phi, float))
        shape = r.shape
        ch = self.chords(r, theta, phi)
        vals = ch["M"] @ ubar.reshape(-1)
        gb = self._data(ch["theta_b"], ch["phi_b"])
        if self.diffusive:
            j0, j1, c0, c1 = self.boundary_columns(ch["theta_b"])
            pb = c0 * p[j0] + c1 * p[j1]
            vals = vals + ch["bw"] * (pb + self.eps * gb)
        else:
            vals = vals + ch["bw"] * gb
        return vals.reshape(shape)


def _rows_from_block(K0, n_r, n_theta, diffusive):
    """Dense circulant coupling ``C[row_block, col_block, offset]``."""
    nb = n_r + (1 if diffusive else 0)
    vol = K0[:, : n_r * n_theta].reshape(nb, n_r, n_theta)
    parts = [vol]
    if diffusive:
        parts.append(K0[:, n_r * n_theta:].reshape(nb, 1, n_theta))
    return np.concatenate(parts, axis=1)


def sweep(problem, u_bar, boundary_moment=None, solver=None):
    """One transport sweep: node values of ``u`` for a given ``u_bar``."""
    solver = solver or _prepared(problem)
    ubar = np.asarray(u_bar, dtype=float).reshape(solver.n_r, solver.n_theta)
    p = np.zeros(solver.n_theta) if boundary_moment is None else np.asarray(boundary_moment, float)
    return solver.node_values(ubar, p)


def _prepared(problem):
    s = DiskSolver(problem)
    s.assemble()
    s._circ = _rows_from_block(s.K0, s.n_r, s.n_theta, s.diffusive)
    return s


def solve(problem, method="direct", tol=1e-10, max_iter=5000, damping=1.0):
    """Fixed point of sweep-then-average.

    ``direct`` inverts the circulant system mode by mode, ``krylov`` runs
    GMRES on the same operator and ``damped`` is plain (relaxed) iteration.
    """
    s = _prepared(problem)
    nb, nt = s.rhs.shape
    b = s.rhs
    history = []
    if method == "direct":
        x = s.solve_direct()
        iters = 1
    elif method == "krylov":
        op = scipy.sparse.linalg.LinearOperator(
            (nb * nt,) * 2, matvec=lambda v: v - s.apply(v.reshape(nb, nt)).ravel())
        count = [0]
        x, info = scipy.sparse.linalg.gmres(op, b.ravel(), rtol=tol * 1e-2, atol=0.0,
                                            restart=100, maxiter=max_iter,
                                            callback=lambda _: count.__setitem__(0, count[0] + 1),
                                            callback_type="legacy")
        x = x.reshape(nb, nt)
        iters = count[0]
        if info != 0:
            raise DiskConvergenceError("GMRES did not converge", history)
    elif method == "damped":
        x = b.copy()
        for iters in range(1, max_iter + 1):
            new = (1 - damping) * x + damping * (s.apply(x) + b)
            d = float(np.max(np.abs(new - x)))
            history.append(d)
            x = new
            if not np.all(np.isfinite(x)):
                raise DiskConvergenceError("NaN in damped iteration", history)
            if d < tol:
                break
        else:
            rate = history[-1] / history[-2] if len(history) > 1 else None
            raise DiskConvergenceError(f"damped iteration stalled at {history[-1]:.3e}",
                                       history, rate)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = float(np.max(np.abs(x - s.apply(x) - b)))
    ubar = x[: s.n_r]
    p = x[s.n_r] if s.diffusive else None
    u = s.node_values(ubar, p if p is not None else np.zeros(nt))
    quad = s.grid.quad
    ubar_check = u @ quad.weights / (2 * np.pi)
    audit = {
        "consistency": float(np.max(np.abs(ubar_check - ubar))),
        "min": float(u.min()),
        "max": float(u.max()),
        "clamped_points": s.clamped,
        "history": history,
    }
    return DiskField(problem, u, ubar, iters, res, p, audit, s)


@dataclass
class LayerView:
    eta: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    truncated: bool


def restrict_to_layer(fld, epsilon=None, eta_max=10.0):
    """Values of ``u`` at ``eta = (1 - r) / eps`` for the rings within ``eta_max``.

    Velocity angles are already measured from the local tangent, so the view
    is a pure reindexing of the node values.
    """
    eps = fld.problem.epsilon if epsilon is None else epsilon
    eta = (1.0 - fld.problem.grid.radii) / eps
    keep = eta <= eta_max
    order = np.argsort(eta[keep])
    truncated = bool(eta.max() < eta_max)
    return LayerView(eta[keep][order], fld.problem.grid.thetas, fld.problem.grid.quad.nodes,
                     fld.u[keep][order], truncated)
