"""Numerical inversion of Laplace transforms.

Two contour methods are offered:

* Euler: trapezoidal discretisation of the Bromwich integral on the line
  Re s = A/(2t), turned into an alternating series and accelerated by
  binomial (Euler) averaging of the partial sums.
* FixedTalbot: trapezoidal rule on a deformed Talbot contour.

Transforms must be vectorised: they are called once with an array of complex
abscissae. A ``shift`` c evaluates F(s + c) and multiplies the result by
exp(c t), which moves the contour to the right of singularities at s > 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import comb


class Method(str, Enum):
    EULER = "euler"
    FIXED_TALBOT = "fixed_talbot"


class InversionError(ArithmeticError):
    """Raised when the transform returns non-finite values on the contour."""


@dataclass(frozen=True)
class InversionConfig:
    method: Method = Method.EULER
    terms: int = 21
    precision_decimals: int = 10

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.terms < 11 or self.terms % 2 == 0:
            raise ValueError("terms must be odd and at least 11")
        if not 4 <= self.precision_decimals <= 14:
            raise ValueError("precision_decimals must lie in [4, 14]")


class Inversion(NamedTuple):
    value: float
    error: float
    evaluations: int


DEFAULT_CONFIG = InversionConfig()
_EULER_AVERAGING = 11


def euler_nodes(t: float, config: InversionConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Abscissae (upper half plane) used by the Euler method at time t."""
    A = config.precision_decimals * math.log(10.0)
    k = np.arange(config.terms + _EULER_AVERAGING + 2)
    return (A + 2j * math.pi * k) / (2.0 * t)


def invert(F: Callable, t: float, config: InversionConfig = DEFAULT_CONFIG,
           shift: float = 0.0, real: bool = True) -> Inversion:
    """Value of the inverse transform of F at t > 0.

    With ``real=False`` the original function may be complex valued and F is
    evaluated on both halves of the contour.
    """
    if not t > 0:
        raise ValueError("inversion time must be positive")
    if config.method is Method.EULER:
        return _euler(F, t, config, shift, real)
    return _talbot(F, t, config, shift, real)


def _evaluate(F, s):
    vals = np.asarray(F(s), dtype=complex)
    if vals.shape != s.shape:
        vals = np.broadcast_to(vals, s.shape)
    if not np.all(np.isfinite(vals)):
        raise InversionError("transform is not finite on the inversion contour")
    return vals


def _euler(F, t, config, shift, real):
    A = config.precision_decimals * math.log(10.0)
    n = config.terms
    m = _EULER_AVERAGING
    s = euler_nodes(t, config)
    upper = _evaluate(F, s + shift)
    if real:
        paired = upper.real
    else:
        lower = _evaluate(F, np.conj(s) + shift)
        paired = 0.5 * (upper + lower)
    signs = (-1.0) ** np.arange(len(s))
    terms = signs * paired
    terms[0] *= 0.5
    scale = math.exp(A / 2.0 + shift * t) / t
    partial = np.cumsum(terms)
    weights = comb(m, np.arange(m + 1)) / 2.0 ** m
    est_n = np.dot(weights, partial[n:n + m + 1])
    est_n1 = np.dot(weights, partial[n + 1:n + m + 2])
    value = scale * est_n
    # acceleration error, discretisation error exp(-A) and rounding in the sum
    err = scale * abs(est_n1 - est_n)
    err += math.exp(-A) * (abs(value) + 1.0) * 3.0
    err += scale * np.finfo(float).eps * float(np.sum(np.abs(terms[:n + m + 1]))) * 10.0
    if real:
        value = float(np.real(value))
    evaluations = len(s) if real else 2 * len(s)
    return Inversion(value, float(err), evaluations)


def _talbot(F, t, config, shift, real):
    M = config.terms + 13  # comparable cost to Euler with the same terms
    digits = config.precision_decimals

    def run(M):
        r = 2.0 * M / (5.0 * t)
        theta = np.arange(1, M) * math.pi / M
        cot = 1.0 / np.tan(theta)
        s = r * theta * (cot + 1j)
        sigma = theta + (theta * cot - 1.0) * cot
        nodes = np.concatenate(([r + 0j], s))
        upper = _evaluate(F, nodes + shift)
        body = np.exp(t * s) * upper[1:] * (1.0 + 1j * sigma)
        head = math.exp(r * t) * upper[0]
        if real:
            total = 0.5 * head.real + np.sum(body.real)
            val = (r / M) * total
            count = M
        else:
            lower = _evaluate(F, np.conj(s) + shift)
            body_l = np.exp(t * np.conj(s)) * lower * (1.0 - 1j * sigma)
            val = (r / (2 * M)) * (head + np.sum(body) + np.sum(body_l))
            count = 2 * M - 1
        return val * math.exp(shift * t), count, r

    value, count, r = run(M)
    coarse, count2, _ = run(M - 4)
    err = abs(value - coarse) + 10.0 ** (-digits) * (abs(value) + 1.0)
    err += np.finfo(float).eps * math.exp(r * t) * abs(value) * 10.0
    if real:
        value = float(np.real(value))
    return Inversion(value, float(err), count + count2)


def invert_2d(F: Callable, u: float, t: float, config: InversionConfig = DEFAULT_CONFIG,
              shift_theta: float = 0.0, shift_q: float = 0.0) -> Inversion:
    """Invert a double transform F(theta, q) = int int e^{-theta u - q t} f(u, t) du dt.

    The inner inversion in theta runs at each outer abscissa q; F receives
    broadcastable arrays (theta[:, None] against q[None, :] style is not
    assumed, F is called per outer node with a theta array and a scalar q).
    """
    if not (u > 0 and t > 0):
        raise ValueError("inversion points must be positive")
    inner_evals = [0]

    def outer(q_nodes):
        out = np.empty(q_nodes.shape, dtype=complex)
        for i, q in enumerate(q_nodes):
            res = invert(lambda th: F(th, q), u, config, shift_theta, real=False)
            out[i] = res.value
            inner_evals[0] += res.evaluations
        return out

    res = invert(outer, t, config, shift_q, real=True)
    return Inversion(res.value, res.error, inner_evals[0])
