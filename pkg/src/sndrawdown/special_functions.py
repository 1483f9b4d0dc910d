"""Mittag-Leffler type series and incomplete gamma helpers.

The series are summed term by term with a ratio recursion (no overflow of the
gamma function) and a vectorised Neumaier compensated accumulator. Arguments
beyond ``SeriesTolerance.budget`` in modulus are refused: the power series
loses all relative accuracy there through cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammaincc, gammaln, gamma as gamma_fn


class SeriesError(ArithmeticError):
    """Raised when a series cannot reach the requested tolerance."""


@dataclass(frozen=True)
class SeriesTolerance:
    abs_tol: float = 1e-16
    max_terms: int = 4000
    budget: float = 50.0

    def __post_init__(self):
        if not 0.0 < self.abs_tol <= 1e-6:
            raise ValueError("abs_tol must lie in (0, 1e-6]")
        if self.max_terms < 50:
            raise ValueError("max_terms must be at least 50")


DEFAULT_TOL = SeriesTolerance()

# largest tolerated rounding error eps * max|term|, relative to max(1, |sum|)
MAX_ROUNDING_ERROR = 1e-9


def _neumaier(terms):
    """Compensated sum along axis 0."""
    total = np.zeros_like(terms[0])
    comp = np.zeros_like(terms[0])
    for t in terms:
        s = total + t
        big = np.abs(total) >= np.abs(t)
        comp = comp + np.where(big, (total - s) + t, (t - s) + total)
        total = s
    return total + comp


def _term_count(log_mag, tol: SeriesTolerance, start: int = 0) -> int:
    """First index past the peak where the term magnitude drops below abs_tol.

    ``log_mag(n)`` is the log of the largest term magnitude at index n.
    """
    log_tol = math.log(tol.abs_tol) - 2.0
    prev = -math.inf
    for n in range(start, tol.max_terms):
        cur = log_mag(n)
        if cur < log_tol and cur <= prev:
            return n + 1
        prev = cur
    raise SeriesError(f"series did not converge within {tol.max_terms} terms")


def _as_array(y):
    arr = np.asarray(y)
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    return arr


def _check_budget(y, tol):
    # a positive real argument gives a series of positive terms, no cancellation
    if np.isrealobj(y) and np.all(y >= 0):
        return
    ymax = float(np.max(np.abs(y))) if y.size else 0.0
    if ymax > tol.budget:
        raise SeriesError(f"|y| = {ymax:.3g} exceeds the series budget {tol.budget}")


def mittag_leffler(beta: float, gamma: float, y, tol: SeriesTolerance = DEFAULT_TOL, *, skip: int = 0):
    """E_{beta,gamma}(y) = sum_n y**n / Gamma(n*beta + gamma).

    ``skip`` drops the first terms, so ``skip=1`` returns E - 1/Gamma(gamma)
    without the cancellation of forming the difference.
    """
    if beta <= 0 or gamma <= 0:
        raise ValueError("beta and gamma must be positive")
    y = _as_array(y)
    _check_budget(y, tol)
    return _power_series(beta, gamma, y, tol, skip, lambda n: np.zeros_like(n))


def mittag_leffler_prime(beta: float, gamma: float, y, tol: SeriesTolerance = DEFAULT_TOL):
    """d/dy E_{beta,gamma}(y) = sum_{n>=1} n y**(n-1) / Gamma(n*beta + gamma)."""
    if beta <= 0 or gamma <= 0:
        raise ValueError("beta and gamma must be positive")
    y = _as_array(y)
    _check_budget(y, tol)
    # shift the index: sum_{m>=0} (m+1) y**m / Gamma(m*beta + beta + gamma)
    return _power_series(beta, beta + gamma, y, tol, 0, lambda m: np.log(m + 1.0))


def _log_powers(base, exponents):
    """|base|**e and the unit phase**e, computed in logs (no overflow)."""
    mag = np.abs(base)
    with np.errstate(divide="ignore"):
        log_mag = np.log(mag)
    phase = np.where(mag > 0, base / np.where(mag > 0, mag, 1.0), 1.0)
    e = exponents.reshape((-1,) + (1,) * base.ndim)
    with np.errstate(invalid="ignore"):
        log_part = np.where(e == 0, 0.0, e * log_mag[None, ...])
    return log_part, phase[None, ...] ** e


def _power_series(beta, gamma, y, tol, skip, log_weight):
    ymax = float(np.max(np.abs(y))) if y.size else 0.0
    log_y = math.log(ymax) if ymax > 0 else -math.inf

    def log_mag(n):
        base = float(log_weight(np.array(float(n)))) - gammaln(n * beta + gamma)
        return base + n * log_y if n else base

    count = _term_count(log_mag, tol, start=skip) if ymax > 0 else skip + 1
    n = np.arange(skip, max(count, skip + 1), dtype=float)
    log_coef = log_weight(n) - gammaln(n * beta + gamma)
    log_part, phase = _log_powers(y, n)
    log_terms = log_coef.reshape((-1,) + (1,) * y.ndim) + log_part
    if np.any(log_terms > 700.0):
        raise SeriesError("series terms overflow double precision")
    terms = np.exp(log_terms) * phase
    return _checked_sum(terms)


def _checked_sum(terms, peak=None):
    total = _neumaier(terms)
    if peak is None:
        peak = np.max(np.abs(terms), axis=0)
    if np.any(np.finfo(float).eps * peak > MAX_ROUNDING_ERROR * np.maximum(1.0, np.abs(total))):
        raise SeriesError(f"cancellation: largest term {float(np.max(peak)):.3g} leaves no accuracy")
    return total


def two_index_mittag_leffler(beta: float, gamma: float, delta: float, y, z,
                             tol: SeriesTolerance = DEFAULT_TOL, *, skip_leading: bool = False):
    """E_{beta,gamma,delta}(y, z) = sum_{n,k} s_{k,n} z**k y**n / Gamma(n*beta + k*delta + gamma).

    s_{0,0} = 1 and s_{k,n} = C(n-1, k) for 0 <= k <= n-1, zero otherwise.
    ``skip_leading`` drops the (0, 0) term. Blocks of fixed n are summed until
    they fall below abs_tol relative to the largest block seen.
    """
    y = _as_array(y)
    z = _as_array(z)
    y, z = np.broadcast_arrays(y, z)
    ymax = float(np.max(np.abs(y))) if y.size else 0.0
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    complex_out = np.iscomplexobj(y) or np.iscomplexobj(z)
    dtype = complex if complex_out else float
    total_blocks = []
    term_peak = np.zeros(y.shape)
    if not skip_leading:
        total_blocks.append(np.full(y.shape, 1.0 / gamma_fn(gamma), dtype=dtype))
        term_peak[...] = abs(1.0 / gamma_fn(gamma))
    prev = math.inf
    peak = -math.inf
    log_tol = math.log(tol.abs_tol) - 2.0
    for n in range(1, tol.max_terms):
        k = np.arange(n, dtype=float)
        p = n * beta + k * delta
        log_coef = gammaln(n) - gammaln(k + 1) - gammaln(n - k) - gammaln(p + gamma)
        log_z, phase_z = _log_powers(z, k)
        log_y, phase_y = _log_powers(y, np.array([float(n)]))
        log_terms = log_coef.reshape((-1,) + (1,) * y.ndim) + log_z + log_y
        if np.any(log_terms > 700.0):
            raise SeriesError("two-index series terms overflow double precision")
        mags = np.exp(log_terms)
        term_peak = np.maximum(term_peak, np.max(mags, axis=0))
        block = np.sum(mags * phase_z, axis=0) * phase_y[0]
        total_blocks.append(block.astype(dtype))
        lmag = float(np.max(log_terms)) + math.log(n)
        peak = max(peak, lmag)
        if peak == -math.inf or (lmag < log_tol + peak and lmag <= prev):
            break
        prev = lmag
    else:
        raise SeriesError("two-index series did not converge")
    return _checked_sum(np.array(total_blocks), term_peak)


def upper_incomplete_gamma(s: float, x):
    """Gamma(s, x) for real s > 0 and x >= 0."""
    x = np.asarray(x, dtype=float)
    return gammaincc(s, x) * gamma_fn(s)


def scaled_upper_gamma_ratio(s: float, w: complex) -> complex:
    """exp(w) * Gamma(s, w) / Gamma(s) for complex w, via mpmath."""
    val = mpmath.exp(w) * mpmath.gammainc(s, w, regularized=True)
    return complex(val)
