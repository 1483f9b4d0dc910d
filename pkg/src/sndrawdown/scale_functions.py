"""q-scale functions W^{(q)}, Z^{(q)} and their tilted variants.

W^{(q)} vanishes on (-inf, 0) and is characterised on [0, inf) by

    int_0^inf exp(-theta x) W^{(q)}(x) dx = 1 / (psi(theta) - q),   theta > Phi(q).

Every backend reduces to a kernel object with one method, ``eval(x, j)``,
returning the j-fold antiderivative (from 0) of W^{(q)} for j >= 0 and the
|j|-th derivative for j < 0. Everything else in this module is built on it.

Backends
--------
closed      exact forms: divided differences of Q(theta) exp(theta x) over the
            roots of a rational psi - q (Brownian, exponential jumps), the
            Mittag-Leffler form for the stable family and the two-index
            series for stable with drift.
series      the Mittag-Leffler forms only (stable families).
inversion   numerical Laplace inversion of the defining transform.
convolution W^{(q)} = sum_k q^k W^{*(k+1)} with product-integrated
            convolutions and Richardson extrapolation.
"""
from __future__ import annotations

import math
import threading
from enum import Enum

import numpy as np
from scipy.linalg import expm
from scipy.signal import fftconvolve
from scipy.special import roots_legendre

from .laplace_inversion import DEFAULT_CONFIG, InversionConfig, invert
from .process_models import Family, ProcessSpec
from .special_functions import DEFAULT_TOL, SeriesError, SeriesTolerance, mittag_leffler, two_index_mittag_leffler


class Backend(str, Enum):
    CLOSED_FORM = "closed"
    ML_SERIES = "series"
    LAPLACE_INVERSION = "inversion"
    CONVOLUTION_SERIES = "convolution"


class BackendError(ValueError):
    """Raised when a backend cannot serve a family or an order of derivative."""


# kernels ---------------------------------------------------------------------


class RationalKernel:
    """psi - q = P(theta) / Q(theta) with polynomials P, Q."""

    def __init__(self, spec: ProcessSpec, q: complex):
        s2 = spec.gaussian_coefficient
        mu = spec.mu if spec.family is not Family.STABLE_NEG else 0.0
        if spec.family is Family.JUMP_DIFFUSION_EXP and spec.lam > 0:
            lam, eta = spec.lam, spec.eta
            P = [0.5 * s2, mu + 0.5 * s2 * eta, mu * eta - lam - q, -q * eta]
            Q = [1.0, eta]
        else:
            P = [0.5 * s2, mu, -q]
            Q = [1.0]
        while P[0] == 0:
            P = P[1:]
        self.lead = P[0]
        self.roots = np.roots(np.asarray(P, dtype=complex))
        self.Q = np.asarray(Q, dtype=complex)
        self.real = np.isrealobj(q) or np.imag(q) == 0

    def _divided(self, nodes, x, Qpoly):
        n = len(nodes)
        J = np.diag(nodes.astype(complex)) + np.diag(np.ones(n - 1), 1)
        QJ = np.zeros((n, n), dtype=complex)
        for c in Qpoly:
            QJ = QJ @ J + c * np.eye(n)
        row = QJ[0]
        x = np.asarray(x, dtype=float)
        E = expm(x.reshape(-1, 1, 1) * J)
        val = (E[:, :, -1] @ row) / self.lead
        return val.reshape(x.shape)

    def eval(self, x, j=0):
        x = np.asarray(x, dtype=float)
        if j >= 0:
            nodes = np.concatenate([np.zeros(j), self.roots])
            Qpoly = self.Q
        else:
            nodes = self.roots
            Qpoly = np.concatenate([self.Q, np.zeros(-j)])
        out = self._divided(nodes, np.maximum(x, 0.0), Qpoly)
        out = np.where(x < 0, 0.0, out)
        return out.real if self.real else out

    def tilted_integral(self, u, x):
        """int_0^x exp(-u z) W^{(q)}(z) dz."""
        nodes = np.concatenate([[0.0], self.roots - u])
        Qs = _poly_shift(self.Q, u)
        out = self._divided(nodes, np.maximum(np.asarray(x, dtype=float), 0.0), Qs)
        real = self.real and np.imag(u) == 0
        return out.real if real else out

    def shifted_transform(self, b, theta):
        """int_0^inf exp(-theta z) W^{(q)}(b + z) dz for Re theta > Phi(q)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=complex))
        n = len(self.roots)
        J = np.diag(self.roots) + np.diag(np.ones(n - 1), 1)
        QJ = np.zeros((n, n), dtype=complex)
        for c in self.Q:
            QJ = QJ @ J + c * np.eye(n)
        M = QJ @ expm(b * J)
        eye = np.eye(n)
        out = np.array([(M @ np.linalg.solve(th * eye - J, eye))[0, -1] for th in theta]) / self.lead
        return out


def _poly_shift(coeffs, u):
    """Coefficients of p(theta + u) from those of p(theta)."""
    p = np.poly1d(coeffs)
    return np.asarray(np.polyval(np.poly1d(p), np.poly1d([1.0, u])).coeffs, dtype=complex)


class StableKernel:
    """psi = (sigma theta)^alpha: W^{(q)}(x) = sigma^-alpha x^(alpha-1) E_{alpha,alpha}(q x^alpha / sigma^alpha)."""

    def __init__(self, spec: ProcessSpec, q: complex, tol: SeriesTolerance):
        self.alpha = spec.alpha
        self.sigma = spec.sigma
        self.q = q
        self.tol = tol
        self.min_power = self.alpha - 1.0

    def eval(self, x, j=0):
        x = np.asarray(x, dtype=float)
        a, s = self.alpha, self.sigma
        g = a + j
        if g <= 0:
            raise BackendError("stable scale function has no second derivative")
        xp = np.maximum(x, 0.0)
        y = self.q * xp ** a / s ** a
        with np.errstate(divide="ignore", invalid="ignore"):
            out = xp ** (g - 1.0) * mittag_leffler(a, g, y, self.tol) / s ** a
        if j < 0:
            out = np.where(xp == 0, np.inf, out)
        return np.where(x < 0, 0.0, out)


class CarrWuKernel:
    """psi = mu theta + (sigma theta)^alpha through the two-index Mittag-Leffler series."""

    def __init__(self, spec: ProcessSpec, q: complex, tol: SeriesTolerance):
        self.alpha = spec.alpha
        self.sigma = spec.sigma
        self.mu = spec.mu
        self.q = q
        self.tol = tol
        self.min_power = self.alpha - 1.0

    def eval(self, x, j=0):
        x = np.asarray(x, dtype=float)
        a, s, mu = self.alpha, self.sigma, self.mu
        if 1.0 + j + (a - 1.0) <= 0:
            raise BackendError("stable scale function has no second derivative")
        xp = np.maximum(x, 0.0)
        y = -mu * xp ** (a - 1.0) / s ** a
        z = -self.q * xp / mu
        series = two_index_mittag_leffler(a - 1.0, 1.0 + j, 1.0, y, z, self.tol, skip_leading=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -xp ** j * series / mu
        if j < 0:
            out = np.where(xp == 0, np.inf, out)
        return np.where(x < 0, 0.0, out)


class InversionKernel:
    """Numerical inversion of theta^(-j) / (psi(theta) - q), real q >= 0."""

    def __init__(self, spec: ProcessSpec, q: float, config: InversionConfig):
        if np.iscomplexobj(q) and np.imag(q) != 0:
            raise BackendError("inversion backend needs real q")
        self.spec = spec
        self.q = float(np.real(q))
        self.config = config
        self.phi = spec.phi(self.q)
        self.evaluations = 0

    def _transform(self, j):
        spec, q = self.spec, self.q
        w0 = spec.scale_at_zero
        if j >= 0:
            return lambda th: 1.0 / (th ** j * (spec.psi(th) - q))
        if j == -1:
            return lambda th: th / (spec.psi(th) - q) - w0
        if j == -2:
            s2 = spec.gaussian_coefficient
            if s2 <= 0:
                raise BackendError("second derivative needs a Gaussian component")
            return lambda th: th * th / (spec.psi(th) - q) - th * w0 - 2.0 / s2
        raise BackendError("unsupported derivative order")

    def eval(self, x, j=0):
        x = np.asarray(x, dtype=float)
        F = self._transform(j)
        out = np.zeros(x.shape)
        for idx, xv in np.ndenumerate(x):
            if xv <= 0:
                out[idx] = 0.0 if xv < 0 or j > 0 else (self.spec.scale_at_zero if j == 0 else np.nan)
                continue
            res = invert(F, float(xv), self.config, shift=self.phi + 1.0 / xv)
            self.evaluations += res.evaluations
            out[idx] = res.value
        return out


class ConvolutionKernel:
    """W^{(q)} = sum_k q^k W^{*(k+1)} built from the q = 0 kernel of the closed backend."""

    def __init__(self, base, q: float, grid_step: float, extrapolate: bool = True):
        if np.iscomplexobj(q) and np.imag(q) != 0:
            raise BackendError("convolution backend needs real q")
        self.base = base
        self.q = float(np.real(q))
        self.grid_step = grid_step
        self.extrapolate = extrapolate

    def _weights(self, kernel_order, n, h):
        # product-integration weights for int_0^{x_N} k(r) f(x_N - r) dr, f piecewise linear
        r = h * np.arange(n + 2)
        K1 = self.base.eval(r, kernel_order + 1)
        K2 = self.base.eval(r, kernel_order + 2)
        D2 = np.diff(K2)
        left = np.zeros(n + 2)
        left[1:] = K1[1:] - D2 / h
        right = -K1[:-1] + D2 / h
        full = left[: n + 1] + right[: n + 1]
        return full, right

    def _conv(self, full, right, f):
        n = len(f) - 1
        out = fftconvolve(full, f)[: n + 1]
        return out - right[: n + 1] * f[0]

    def _solve(self, x, n):
        h = x / n
        grid = h * np.arange(n + 1)
        w0 = self.base.eval(grid, 0)
        full, right = self._weights(0, n, h)
        total = w0.copy()
        term = w0
        for k in range(1, 2000):
            term = self.q * self._conv(full, right, term)
            total += term
            if np.max(np.abs(term)) <= 1e-17 * np.max(np.abs(total)):
                break
        return grid, total, h

    def _grid_values(self, x, j, n):
        """Values of order j on the whole grid x_i = i x / n."""
        grid, Wq, h = self._solve(x, n)
        if j == 0:
            return Wq
        if j == 1:
            full, right = self._weights(1, n, h)
            return self.base.eval(grid, 1) + self.q * self._conv(full, right, Wq)
        if j == -1:
            full, right = self._weights(-1, n, h)
            w_zero = float(self.base.eval(0.0, 0))
            with np.errstate(invalid="ignore"):
                out = self.base.eval(grid, -1) + self.q * (w_zero * Wq + self._conv(full, right, Wq))
            return out
        raise BackendError("convolution backend supports orders -1, 0, 1")

    def eval(self, x, j=0):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        flat = x.ravel()
        res = out.ravel()
        # points sharing the same grid step are served by one solve
        groups: dict = {}
        for i, xv in enumerate(flat):
            if xv <= 0:
                res[i] = float(self.base.eval(0.0, j)) if xv == 0 and j == 0 else 0.0
                continue
            n = max(8, int(math.ceil(xv / self.grid_step - 1e-9)))
            h = round(xv / n, 13)
            groups.setdefault(h, []).append((i, n))
        for h, members in groups.items():
            n_max = max(n for _, n in members)
            levels = (1, 2, 4) if self.extrapolate else (1,)
            grids = [self._grid_values(h * n_max, j, n_max * m) for m in levels]
            for i, n in members:
                vals = [g[n * m] for g, m in zip(grids, levels)]
                res[i] = _richardson(*vals) if self.extrapolate else vals[0]
        return res.reshape(x.shape)


def _richardson(f1, f2, f4):
    # second-order step error: two levels of Richardson with exponent 2, then 3
    r1 = (4.0 * f2 - f1) / 3.0
    r2 = (4.0 * f4 - f2) / 3.0
    return (8.0 * r2 - r1) / 7.0


# numeric helpers -------------------------------------------------------------


def _power_quadrature(f, x, min_power, n=96):
    """int_0^x f(z) dz for f behaving like a sum of powers z^p with p >= min_power."""
    m = max(1.0, 9.0 / (min_power + 1.0))
    w, wt = roots_legendre(n)
    s = 0.5 * (w + 1.0)
    z = x * s ** m
    jac = x * m * s ** (m - 1.0)
    return 0.5 * np.sum(wt * jac * f(z))


# engine ----------------------------------------------------------------------


class ScaleEngine:
    """Scale function evaluator for one process and one backend.

    Values are memoised per (quantity, q, x) when ``cache`` is on; the cache
    is guarded by a lock so an engine may be shared between threads.
    """

    def __init__(self, spec: ProcessSpec, backend: Backend | str = Backend.CLOSED_FORM,
                 inversion: InversionConfig = DEFAULT_CONFIG, tolerance: SeriesTolerance = DEFAULT_TOL,
                 grid_step: float = 2e-3, cache: bool = True):
        self.spec = spec
        self.backend = Backend(backend)
        self.inversion = inversion
        self.tolerance = tolerance
        self.grid_step = grid_step
        self._kernels: dict = {}
        self._values: dict | None = {} if cache else None
        self._lock = threading.Lock()
        if self.backend is Backend.ML_SERIES and not _has_series_form(spec):
            raise BackendError(f"no Mittag-Leffler form for {spec.family.value}")

    # kernels

    def kernel(self, q):
        q = _normalise_q(q)
        with self._lock:
            k = self._kernels.get(q)
        if k is None:
            k = self._build(q)
            with self._lock:
                self._kernels[q] = k
        return k

    def _closed(self, q):
        spec = self.spec
        if spec.family in (Family.BROWNIAN_DRIFT, Family.JUMP_DIFFUSION_EXP) or spec.alpha == 2.0:
            return RationalKernel(spec, q)
        if spec.family is Family.STABLE_DRIFT and spec.mu != 0.0:
            return CarrWuKernel(spec, q, self.tolerance)
        return StableKernel(spec, q, self.tolerance)

    def _build(self, q):
        if self.backend in (Backend.CLOSED_FORM, Backend.ML_SERIES):
            return self._closed(q)
        if self.backend is Backend.LAPLACE_INVERSION:
            return InversionKernel(self.spec, q, self.inversion)
        return ConvolutionKernel(self._closed(0.0), q, self.grid_step)

    def _eval(self, name, q, x, j):
        x_arr = np.asarray(x, dtype=float)
        key = None
        if self._values is not None:
            key = (name, _normalise_q(q), x_arr.shape, x_arr.tobytes())
            with self._lock:
                hit = self._values.get(key)
            if hit is not None:
                return hit
        out = self.kernel(q).eval(x_arr, j)
        out = out[()] if np.ndim(out) == 0 else out
        if key is not None:
            with self._lock:
                self._values[key] = out
        return out

    # scale functions

    def W(self, q, x):
        return self._eval("W", q, x, 0)

    def W_prime(self, q, x, side: str = "right"):
        """One-sided derivative W^{(q)}'(x+) or W^{(q)}'(x-).

        Every supported family has a continuously differentiable scale
        function on (0, inf) (the jump measures have no atoms), so both sides
        coincide there. The right derivative at x = 0 is the limit W'(0+).
        """
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr < 0) or (side == "left" and np.any(x_arr <= 0)):
            raise ValueError("W_prime needs x > 0 (x = 0 allowed for the right derivative)")
        return self._eval("W'", q, x, -1)

    def W_second(self, q, x):
        if self.spec.gaussian_coefficient <= 0:
            raise BackendError("second derivative is only used with a Gaussian component")
        return self._eval("W''", q, x, -2)

    def W_int(self, q, x):
        """int_0^x W^{(q)}(y) dy."""
        return self._eval("IW", q, x, 1)

    def Z(self, q, x):
        x = np.asarray(x, dtype=float)
        out = 1.0 + q * self.W_int(q, x)
        return out

    def lambda_ratio(self, q, a):
        """W^{(q)}'(a+) / W^{(q)}(a)."""
        return self.W_prime(q, a) / self.W(q, a)

    def tilted_integral(self, u, q, x):
        """int_0^x exp(-u z) W^{(q)}(z) dz for real or complex u and q."""
        k = self.kernel(q)
        if isinstance(k, RationalKernel):
            return k.tilted_integral(u, x)
        x = np.asarray(x, dtype=float)
        min_power = getattr(k, "min_power", 0.0)
        vals = [_power_quadrature(lambda z: np.exp(-u * z) * k.eval(z, 0), float(xv), min_power)
                for xv in np.atleast_1d(x)]
        out = np.asarray(vals).reshape(x.shape)
        return out[()] if out.ndim == 0 else out

    def W_tilted(self, u, p, x):
        """W_u^{(p)}(x) = exp(-u x) W^{(p + psi(u))}(x)."""
        q = p + complex(self.spec.psi(u)) if np.iscomplexobj(u) else p + float(self.spec.psi(u))
        return np.exp(-u * np.asarray(x, dtype=float)) * self.W(q, x)

    def Z_tilted(self, u, p, x):
        """Z_u^{(p)}(x) = 1 + p int_0^x exp(-u z) W^{(p + psi(u))}(z) dz."""
        q = p + self.spec.psi(u)
        q = complex(q) if np.iscomplexobj(q) else float(q)
        return 1.0 + p * self.tilted_integral(u, q, x)

    def shifted_transform(self, q, b, theta):
        """int_0^inf exp(-theta z) W^{(q)}(b + z) dz, evaluated for an array of theta."""
        k = self.kernel(q)
        theta = np.atleast_1d(np.asarray(theta, dtype=complex))
        if isinstance(k, RationalKernel):
            return k.shifted_transform(b, theta)
        # W(b + z) grows like exp(Phi(q) z), so the decay rate is Re theta - Phi(q)
        gap = float(np.min(theta.real)) - self.spec.phi(float(np.real(q)))
        if gap <= 0:
            raise ValueError("shifted transform needs Re theta > Phi(q)")
        span = 40.0 / gap
        omega = float(np.max(np.abs(theta.imag)))
        n = int(96 + 1.2 * omega * span)
        nodes, weights = roots_legendre(n)
        z = 0.5 * span * (nodes + 1.0)
        try:
            Wz = k.eval(b + z, 0)
        except SeriesError:
            # series cancel far out; the quadrature nodes only need W itself
            if np.iscomplexobj(q) and np.imag(q) != 0:
                raise
            Wz = InversionKernel(self.spec, q, self.inversion).eval(b + z, 0)
        wz = 0.5 * span * weights * Wz
        return np.exp(-np.outer(theta, z)) @ wz


def _normalise_q(q):
    if np.iscomplexobj(q):
        q = complex(q)
        return q.real if q.imag == 0 else q
    return float(q)


def _has_series_form(spec: ProcessSpec) -> bool:
    return spec.family in (Family.STABLE_NEG, Family.STABLE_DRIFT)


# functional interface ---------------------------------------------------------


def W_carr_wu(spec: ProcessSpec, q, x, tol: SeriesTolerance = DEFAULT_TOL):
    """Two-index Mittag-Leffler series for the stable-with-drift scale function."""
    if spec.family is not Family.STABLE_DRIFT:
        raise BackendError("W_carr_wu needs the stable_drift family")
    return CarrWuKernel(spec, q, tol).eval(x, 0)


def W_conv_series(spec: ProcessSpec, q, x, grid_step: float = 2e-3):
    engine = ScaleEngine(spec, Backend.CONVOLUTION_SERIES, grid_step=grid_step, cache=False)
    return engine.W(q, x)


def scale_table(engine: ScaleEngine, xs, qs):
    """Rows (x, q, W, W_prime_plus, Z) for export."""
    rows = []
    xs = np.asarray(xs, dtype=float)
    for q in qs:
        W = np.atleast_1d(engine.W(q, xs))
        Wp = np.atleast_1d(engine.W_prime(q, xs))
        Z = np.atleast_1d(engine.Z(q, xs))
        for i, x in enumerate(np.atleast_1d(xs)):
            rows.append((float(x), float(q), float(W[i]), float(Wp[i]), float(Z[i])))
    return rows
