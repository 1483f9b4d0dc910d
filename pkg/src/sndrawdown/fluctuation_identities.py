"""First-passage identities expressed through scale functions.

Notation: T+_v and T-_u are the first passage times above v and below u,
tau_a is the first time the drawdown Y = sup X - X exceeds a, and
lambda(a, q) = W^{(q)}'(a+) / W^{(q)}(a).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.integrate import quad

from .process_models import Family
from .scale_functions import ScaleEngine


@dataclass(frozen=True)
class ExitQuery:
    """Start x inside [u, v], discount rate q."""
    u: float
    v: float
    x: float
    q: float = 0.0

    def __post_init__(self):
        if not self.u < self.v:
            raise ValueError("exit query needs u < v")
        if not self.u <= self.x <= self.v:
            raise ValueError("exit query needs x in [u, v]")
        if self.q < 0:
            raise ValueError("q must be nonnegative")


def scale_value(engine: ScaleEngine, q, x):
    """W^{(q)}(x), extended by zero to x < 0."""
    x = float(x)
    if x < 0:
        return 0.0
    if x == 0:
        return engine.spec.scale_at_zero
    return float(engine.W(q, x))


def scalar(v):
    """Python float, or complex when v carries an imaginary part type."""
    return complex(v) if np.iscomplexobj(v) else float(v)


def has_jumps(spec) -> bool:
    if spec.family is Family.JUMP_DIFFUSION_EXP:
        return spec.lam > 0
    return spec.is_stable_family


def exit_up(engine: ScaleEngine, query: ExitQuery) -> float:
    """E_x[exp(-q T+_v); T+_v < T-_u]."""
    return scale_value(engine, query.q, query.x - query.u) / scale_value(engine, query.q, query.v - query.u)


def exit_down(engine: ScaleEngine, query: ExitQuery) -> float:
    """E_x[exp(-q T-_u); T-_u < T+_v]."""
    q = query.q
    lo = query.x - query.u
    width = query.v - query.u
    ratio = scale_value(engine, q, lo) / scale_value(engine, q, width)
    return float(engine.Z(q, lo) - engine.Z(q, width) * ratio)


def creep_one_sided(engine: ScaleEngine, u_level: float, x: float, q: float = 0.0) -> float:
    """E_x[exp(-q T-_u); X(T-_u) = u], the transform of creeping below u."""
    s2 = engine.spec.gaussian_coefficient
    if s2 == 0.0:
        return 0.0
    d = x - u_level
    if d < 0:
        raise ValueError("creep_one_sided needs u_level <= x")
    phi = engine.spec.phi(q)
    return 0.5 * s2 * (float(engine.W_prime(q, d)) - phi * scale_value(engine, q, d))


def creep_two_sided(engine: ScaleEngine, query: ExitQuery) -> float:
    """E_x[exp(-q T-_u); X(T-_u) = u, T-_u < T+_v]."""
    s2 = engine.spec.gaussian_coefficient
    if s2 == 0.0:
        return 0.0
    q = query.q
    d = query.x - query.u
    width = query.v - query.u
    lam = float(engine.lambda_ratio(q, width))
    return 0.5 * s2 * (float(engine.W_prime(q, d)) - lam * scale_value(engine, q, d))


def taua_laplace(engine: ScaleEngine, q: float, a: float) -> float:
    """E[exp(-q tau_a)]; q may be complex with Re q >= 0."""
    if a <= 0:
        raise ValueError("a must be positive")
    if q == 0:
        return 1.0
    W = scalar(engine.W(q, a))
    return scalar(engine.Z(q, a)) - q * W * W / scalar(engine.W_prime(q, a))


def resolvent_density(engine: ScaleEngine, q: float, a: float, y: float) -> tuple[float, float]:
    """Density and atom at zero of the q-resolvent of Y killed at tau_a.

    Returns (lambda^{-1} W'(y) - W(y), lambda^{-1} W(0)).
    """
    if not 0.0 <= y <= a:
        raise ValueError("resolvent_density needs 0 <= y <= a")
    lam = float(engine.lambda_ratio(q, a))
    atom = engine.spec.scale_at_zero / lam
    if y == 0 and not engine.spec.has_bounded_variation:
        # W'(0+) is finite only with a Gaussian part
        s2 = engine.spec.gaussian_coefficient
        dens = (2.0 / s2) / lam if s2 > 0 else math.inf
        return dens, atom
    return float(engine.W_prime(q, y)) / lam - scale_value(engine, q, y), atom


def delta_creep(engine: ScaleEngine, q: float, a: float) -> float:
    """E[exp(-q tau_a); Y(tau_a) = a], zero without a Gaussian part."""
    if a <= 0:
        raise ValueError("a must be positive")
    s2 = engine.spec.gaussian_coefficient
    if s2 == 0.0:
        return 0.0
    W1 = float(engine.W_prime(q, a))
    W2 = float(engine.W_second(q, a))
    W = float(engine.W(q, a))
    return 0.5 * s2 * (W1 - W2 * W / W1)


def jump_overshoot_mass(engine: ScaleEngine, q: float, a: float, theta: float = 0.0) -> float:
    """int_0^a R(dy) int_0^inf exp(-theta h) Lambda(y - a - dh).

    The inner integral is closed form for the supported jump measures:
    the Levy tail for theta = 0, and for theta > 0 an exponential
    (jump diffusion) or an incomplete gamma integral (stable).
    """
    spec = engine.spec
    if not has_jumps(spec):
        return 0.0
    lam = float(engine.lambda_ratio(q, a))
    inner = _jump_tail_transform(spec, theta)

    def integrand(y):
        return (float(engine.W_prime(q, y)) / lam - scale_value(engine, q, y)) * inner(a - y)

    total = spec.scale_at_zero / lam * inner(a)
    if spec.is_stable_family:
        total += _stable_singular_integral(integrand, a, spec.alpha)
    else:
        val, _ = quad(integrand, 0.0, a, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += val
    return total


def _jump_tail_transform(spec, theta):
    """d -> int_0^inf exp(-theta h) nu(-d - h) dh for d > 0."""
    if spec.family is Family.JUMP_DIFFUSION_EXP:
        rate = spec.lam * spec.eta / (spec.eta + theta)
        return lambda d: rate * math.exp(-spec.eta * d)
    c = spec.stable_levy_constant()
    alpha = spec.alpha
    if theta == 0:
        return lambda d: c * d ** (-alpha) / alpha
    def tail(d):
        # e^{theta d} theta^alpha Gamma(-alpha, theta d)
        s = theta * d
        return c * theta ** alpha * float(mpmath.exp(s) * mpmath.gammainc(-alpha, s))
    return tail


def _stable_singular_integral(f, a, alpha):
    """int_0^a f for f ~ y^{alpha-2} at 0 and f ~ (a-y)^{1-alpha} at a."""
    mid = 0.5 * a
    # the weighted rules sample the endpoints, where f itself is singular
    y_max = a * (1.0 - 1e-10)

    def left_part(y):
        y = max(y, 1e-12 * a)
        return f(y) * y ** (2.0 - alpha)

    def right_part(y):
        y = min(y, y_max)
        return f(y) * (a - y) ** (alpha - 1.0)

    left, _ = quad(left_part, 0.0, mid, weight="alg", wvar=(alpha - 2.0, 0.0),
                   epsabs=1e-13, epsrel=1e-10, limit=200)
    right, _ = quad(right_part, mid, a, weight="alg", wvar=(0.0, 1.0 - alpha),
                    epsabs=1e-13, epsrel=1e-10, limit=200)
    return left + right


def normalization_c(engine: ScaleEngine, a: float) -> float:
    """Total mass of the law of Y at tau_a split into jumps and creeping.

    The jump part integrates the resolvent of Y killed at tau_a against the
    Levy tail; the creeping part is delta_creep. The result should be 1.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    return jump_overshoot_mass(engine, 0.0, a) + delta_creep(engine, 0.0, a)
