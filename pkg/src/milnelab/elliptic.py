"""Spectral interior solvers on the unit disk.

Laplace with Dirichlet data and the modified Helmholtz equation
``Lap u - u = s`` with Neumann data, both in Fourier modes ``e^{i k theta}``.
Modified Bessel functions ``I_k`` are summed from their ascending series.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SERIES_TERMS = 40  # r <= 1 and k <= 64: terms fall below 1e-30 well before this


class UnsupportedFeature(ValueError):
    pass


@dataclass
class FourierBoundaryData:
    """``a0/2 + sum_k a_k cos(k theta) + b_k sin(k theta)``; ``a[0]`` is ``a0``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        n = max(self.a.size, self.b.size)
        self.a = np.pad(self.a, (0, n - self.a.size))
        self.b = np.pad(self.b, (0, n - self.b.size))
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("Fourier coefficients must be finite")

    @property
    def k_max(self):
        return self.a.size - 1

    @classmethod
    def constant(cls, c):
        return cls([2.0 * c], [0.0])

    @classmethod
    def from_samples(cls, values, k_max=None):
        """Coefficients from samples on ``n`` uniform angles ``2 pi j / n``."""
        v = np.asarray(values, dtype=float)
        n = v.size
        k_max = n // 2 if k_max is None else min(k_max, n // 2)
        c = np.fft.rfft(v) / n
        a = 2 * c.real[: k_max + 1]
        b = -2 * c.imag[: k_max + 1]
        if n % 2 == 0 and k_max == n // 2:
            a[-1] /= 2
            b[-1] = 0.0
        b[0] = 0.0
        return cls(a, b)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        k = np.arange(self.a.size)
        out = self.a[0] / 2 + np.zeros_like(theta)
        kt = np.multiply.outer(theta, k[1:])
        return out + np.cos(kt) @ self.a[1:] + np.sin(kt) @ self.b[1:]


def bessel_i(k, r):
    """``I_k(r)`` by the ascending series with compensated summation."""
    r = np.asarray(r, dtype=float)
    half = r / 2
    term = half ** k / math.factorial(k)
    total = np.array(term, dtype=float)
    comp = np.zeros_like(total)
    q = half * half
    for m in range(1, SERIES_TERMS):
        term = term * q / (m * (m + k))
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def bessel_i_prime(k, r):
    """``I_k'(r) = (I_{k-1} + I_{k+1}) / 2``."""
    return _ip(k, r)


@dataclass
class InteriorSolution:
    """Modal solution ``sum_k R_k(r) (A_k cos k theta + B_k sin k theta)``.

    ``radial(k, r, derivative)`` returns ``R_k``, ``R_k'`` or ``R_k''``.
    """

    a: np.ndarray
    b: np.ndarray
    kind: str
    radial_source: object = None

    def radial(self, k, r, d=0):
        r = np.asarray(r, dtype=float)
        if self.kind == "laplace":
            if d == 0:
                return r ** k
            if d == 1:
                return k * r ** (k - 1) if k else np.zeros_like(r)
            return k * (k - 1) * r ** (k - 2) if k > 1 else np.zeros_like(r)
        norm = _iprime1(k)
        if d == 0:
            return bessel_i(k, r) / norm
        if d == 1:
            return _ip(k, r) / norm
        # I_k'' = (1 + k^2/r^2) I_k - I_k'/r
        rr = np.where(r == 0, 1.0, r)
        return ((1 + k * k / rr ** 2) * bessel_i(k, r) - _ip(k, r) / rr) / norm

    def _modes(self):
        return range(self.a.size)

    def __call__(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        out = np.zeros(r.shape)
        for k in self._modes():
            c = self.a[k] / 2 if k == 0 else self.a[k]
            if c == 0 and self.b[k] == 0:
                continue
            out = out + self.radial(k, r) * (c * np.cos(k * theta) + self.b[k] * np.sin(k * theta))
        if self.radial_source is not None:
            out = out + self.radial_source(r)
        return out

    def derivatives(self, r, theta):
        """``(du/dr, du/dtheta)``."""
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        ur = np.zeros(r.shape)
        ut = np.zeros(r.shape)
        for k in self._modes():
            c = self.a[k] / 2 if k == 0 else self.a[k]
            if c == 0 and self.b[k] == 0:
                continue
            ur = ur + self.radial(k, r, 1) * (c * np.cos(k * theta) + self.b[k] * np.sin(k * theta))
            ut = ut + self.radial(k, r) * k * (-c * np.sin(k * theta) + self.b[k] * np.cos(k * theta))
        if self.radial_source is not None:
            ur = ur + self.radial_source.derivative(r)
        return ur, ut

    def operator_residual(self, r, theta):
        """``Lap u`` (Laplace) or ``Lap u - u - s`` (Helmholtz) from modal derivatives."""
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        out = np.zeros(r.shape)
        for k in self._modes():
            c = self.a[k] / 2 if k == 0 else self.a[k]
            if c == 0 and self.b[k] == 0:
                continue
            R, R1, R2 = (self.radial(k, r, d) for d in range(3))
            lap = R2 + R1 / r - k * k * R / r ** 2
            if self.kind != "laplace":
                lap = lap - R
            out = out + lap * (c * np.cos(k * theta) + self.b[k] * np.sin(k * theta))
        if self.radial_source is not None:
            out = out + self.radial_source.residual(r)
        return out


def _ip(k, r):
    r = np.asarray(r, dtype=float)
    return 0.5 * (bessel_i(abs(k - 1), r) + bessel_i(k + 1, r))


def _iprime1(k):
    return float(_ip(k, 1.0))


def gradient(sol, x):
    """Cartesian gradient at points ``x`` (shape (..., 2))."""
    x = np.asarray(x, dtype=float)
    if np.any(np.hypot(x[..., 0], x[..., 1]) > 1 + 1e-12):
        raise ValueError("point outside the unit disk")
    r = np.hypot(x[..., 0], x[..., 1])
    th = np.arctan2(x[..., 1], x[..., 0])
    ur, ut = sol.derivatives(r, th)
    rs = np.where(r > 0, r, 1.0)
    gx = ur * np.cos(th) - ut * np.sin(th) / rs
    gy = ur * np.sin(th) + ut * np.cos(th) / rs
    if np.any(r == 0):
        # at the centre only the k = 1 mode contributes
        c = r == 0
        a1 = sol.a[1] if sol.a.size > 1 else 0.0
        b1 = sol.b[1] if sol.b.size > 1 else 0.0
        d1 = float(sol.radial(1, np.array(0.0), 1)) if sol.a.size > 1 else 0.0
        gx = np.where(c, a1 * d1, gx)
        gy = np.where(c, b1 * d1, gy)
    return np.stack([gx, gy], axis=-1)


def solve_laplace_dirichlet(data):
    """Harmonic extension ``a0/2 + sum r^k (a_k cos k theta + b_k sin k theta)``."""
    return InteriorSolution(data.a.copy(), data.b.copy(), "laplace")


class RadialSource:
    """Particular solution of ``u'' + u'/r - u = s(r)`` regular at 0 with ``u'(1) = 0``.

    Variation of parameters with ``I_0`` and ``K_0`` (Wronskian ``-1/r``).
    """

    def __init__(self, s, n=400):
        from scipy.integrate import cumulative_simpson
        self.s = s
        r = np.linspace(0.0, 1.0, 2 * n + 1)
        sv = np.asarray(s(r), dtype=float)
        i0, k0 = special.i0(r), special.k0(np.where(r > 0, r, 1.0))
        k0 = np.where(r > 0, k0, 0.0)
        # W(I0, K0) = -1/r gives u_p = I0 int_0^r K0 s t - K0 int_0^r I0 s t
        fi = cumulative_simpson(i0 * sv * r, x=r, initial=0.0)
        fk = cumulative_simpson(k0 * sv * r, x=r, initial=0.0)
        up = -k0 * fi + i0 * fk
        up[0] = i0[0] * fk[0]
        dp = special.k1(np.where(r > 0, r, 1.0)) * fi + special.i1(r) * fk
        dp[0] = 0.0
        c = -dp[-1] / special.i1(1.0)   # add c I0 to enforce u'(1) = 0
        self.r = r
        self.u = up + c * i0
        self.du = dp + c * special.i1(r)

    def __call__(self, r):
        return np.interp(r, self.r, self.u)

    def derivative(self, r):
        return np.interp(r, self.r, self.du)

    def residual(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


def solve_modified_helmholtz_neumann(neumann, volume_source=None):
    """``Lap u - u = s`` in the disk with ``du/dr = neumann`` on ``r = 1``.

    ``volume_source`` may be None or a radial profile ``s(r)``; anything else
    (theta-dependent sources) is not supported.
    """
    if volume_source is not None and not callable(volume_source):
        raise UnsupportedFeature("only radial volume sources are supported")
    a = np.array(neumann.a, dtype=float)
    b = np.array(neumann.b, dtype=float)
    # radial() is normalised by I_k'(1), so the coefficients equal the data
    src = RadialSource(volume_source) if volume_source is not None else None
    return InteriorSolution(a, b, "helmholtz", src)
