"""Joint laws at the first drawdown time tau_a and the first drawup time hat_tau_a.

Y = sup X - X is the drawdown and hat_Y = X - inf X the drawup.
tau_a = inf{t : Y_t > a} and hat_tau_a = inf{t : hat_Y_t > a}.

The sextuple law at tau_a is returned in density form: a LawValue carrying
the product of its named factors, so each piece can be checked on its own.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .fluctuation_identities import (delta_creep, has_jumps, scalar, scale_value, taua_laplace)
from .scale_functions import ScaleEngine

NEG_INF = -math.inf


@dataclass(frozen=True)
class SextupleQuery:
    """Coordinates of the sextuple law at tau_a.

    u is the floor for the running infimum (``NEG_INF`` for no floor), v the
    value of the running supremum, y the drawdown just before tau_a and h the
    overshoot Y(tau_a) - a. y and h are unused on the creeping event.
    """
    x: float
    a: float
    q: float = 0.0
    r: float = 0.0
    u: float = NEG_INF
    v: float = 0.0
    y: float = 0.0
    h: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.q < 0 or self.r < 0:
            raise ValueError("q and r must be nonnegative")


@dataclass(frozen=True)
class LawValue:
    value: float
    components: tuple = field(default_factory=tuple)

    def component(self, name: str) -> float:
        return dict(self.components)[name]


def _lam(engine, q, a):
    return scalar(engine.lambda_ratio(q, a))


def F_factor(engine: ScaleEngine, p: float, q: float, a: float, y: float) -> float:
    """lambda(a, q) exp(-y lambda(a, p)) for y >= 0."""
    if y < 0:
        return 0.0
    return _lam(engine, q, a) * math.exp(-y * _lam(engine, p, a))


def _entry_and_F(engine, query):
    x, a, q, r, u, v = query.x, query.a, query.q, query.r, query.u, query.v
    if u == NEG_INF:
        entry = 1.0
        start = x
    else:
        entry = scale_value(engine, q + r, min(x - u, a)) / scale_value(engine, q + r, a)
        start = max(x, u + a)
    return entry, F_factor(engine, q + r, q, a, v - start)


def _outside(query, creeping):
    x, a, u, v = query.x, query.a, query.u, query.v
    if u > x:
        return True
    start = x if u == NEG_INF else max(x, u + a)
    if v < start:
        return True
    if creeping:
        return False
    if not 0.0 <= query.y <= a or query.h <= 0:
        return True
    return u != NEG_INF and query.h > v - u - a


def _zero(names):
    return LawValue(0.0, tuple((n, 0.0) for n in names))


_OVERSHOOT = ("entry_factor", "F_factor", "resolvent_factor", "jump_factor")
_CREEP = ("entry_factor", "F_factor", "creep_factor")


def sextuple_overshoot_density(engine: ScaleEngine, query: SextupleQuery) -> LawValue:
    """Density in (v, y, h) of E_x[exp(-q tau_a - r G_bar); inf X >= u, sup X in dv, Y- in dy, Y - a in dh].

    G_bar is the time of the running supremum at tau_a. The y = 0 atom of the
    resolvent (bounded variation only) is given by sextuple_overshoot_atom.
    """
    spec = engine.spec
    if not has_jumps(spec) or _outside(query, creeping=False):
        return _zero(_OVERSHOOT)
    entry, F = _entry_and_F(engine, query)
    lam = _lam(engine, query.q, query.a)
    y = query.y
    if y == 0.0:
        resolvent = _resolvent_at_zero(engine, query.q, lam)
    else:
        resolvent = float(engine.W_prime(query.q, y)) / lam - scale_value(engine, query.q, y)
    jump = float(spec.levy_density(y - query.a - query.h))
    parts = (entry, F, resolvent, jump)
    return LawValue(float(np.prod(parts)), tuple(zip(_OVERSHOOT, parts)))


def _resolvent_at_zero(engine, q, lam):
    s2 = engine.spec.gaussian_coefficient
    if engine.spec.has_bounded_variation:
        return float(engine.W_prime(q, 0.0)) / lam - engine.spec.scale_at_zero
    return (2.0 / s2) / lam if s2 > 0 else math.inf


def sextuple_overshoot_atom(engine: ScaleEngine, query: SextupleQuery) -> LawValue:
    """Density in (v, h) of the same law on {Y(tau_a -) = 0}.

    Nonzero only for bounded variation paths, where the resolvent has the
    atom W(0)/lambda at zero.
    """
    spec = engine.spec
    q0 = SextupleQuery(query.x, query.a, query.q, query.r, query.u, query.v, 0.0, query.h)
    if not has_jumps(spec) or spec.scale_at_zero == 0.0 or _outside(q0, creeping=False):
        return _zero(_OVERSHOOT)
    entry, F = _entry_and_F(engine, q0)
    resolvent = spec.scale_at_zero / _lam(engine, query.q, query.a)
    jump = float(spec.levy_density(-query.a - query.h))
    parts = (entry, F, resolvent, jump)
    return LawValue(float(np.prod(parts)), tuple(zip(_OVERSHOOT, parts)))


def sextuple_creep_density(engine: ScaleEngine, query: SextupleQuery) -> LawValue:
    """Density in v of E_x[exp(-q tau_a - r G_bar); inf X >= u, sup X in dv, Y(tau_a) = a]."""
    if engine.spec.gaussian_coefficient == 0.0 or _outside(query, creeping=True):
        return _zero(_CREEP)
    entry, F = _entry_and_F(engine, query)
    creep = delta_creep(engine, query.q, query.a)
    parts = (entry, F, creep)
    return LawValue(float(np.prod(parts)), tuple(zip(_CREEP, parts)))


# marginals at tau_a -----------------------------------------------------------


def min_before_tau_cdf(engine: ScaleEngine, a: float, z: float) -> float:
    """W(z /\\ a) / W(a).

    This is P_x[x - inf_{t<tau_a} X_t <= z, sup X(tau_a) >= x + a - z]: the
    path reaches x + a - z before going below x - z. Without downward jumps
    the second condition is implied by the first and the value is the
    marginal cdf of the depth of the infimum; with jumps the marginal is
    larger.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if z < 0:
        return 0.0
    return scale_value(engine, 0.0, min(z, a)) / scale_value(engine, 0.0, a)


def sup_at_tau_ccdf(engine: ScaleEngine, a: float, z: float) -> float:
    """P_x[sup X(tau_a) - x >= z] = exp(-z lambda(a, 0))."""
    if z <= 0:
        return 1.0
    return math.exp(-z * _lam(engine, 0.0, a))


# drawup side --------------------------------------------------------------------


def _Z_tilted(engine, u, p, x):
    if x <= 0:
        return 1.0
    if u == 0:
        return float(engine.Z(p, x))
    return float(engine.Z_tilted(u, p, x))


def quadruple_transform(engine: ScaleEngine, x: float, a: float, q: float, r: float,
                        u: float, v: float) -> float:
    """E_x[exp(-q hat_tau - r G_low + u inf X(hat_tau)); sup X(hat_tau) < v].

    G_low is the time of the running infimum at hat_tau_a.
    """
    if a <= 0 or min(q, r, u) < 0:
        raise ValueError("need a > 0 and q, r, u >= 0")
    qr = q + r
    p = qr - float(engine.spec.psi(u))
    Wqr_a = scale_value(engine, qr, a)
    lead = Wqr_a / scale_value(engine, q, a)
    first = math.exp(-u * (a - x)) * _Z_tilted(engine, u, p, a + x - v) / _Z_tilted(engine, u, p, a)
    second = math.exp(-u * (a - v)) * scale_value(engine, qr, a + x - v) / Wqr_a
    return lead * (first - second)


def hat_tau_joint_min_laplace(engine: ScaleEngine, a: float, q: float, u: float) -> float:
    """E[exp(-q hat_tau_a + u inf X(hat_tau_a))] from X_0 = 0."""
    if min(q, u) < 0:
        raise ValueError("q and u must be nonnegative")
    p = q - float(engine.spec.psi(u))
    return math.exp(-a * u) / _Z_tilted(engine, u, p, a)


def max_at_hat_tau_cdf(engine: ScaleEngine, a: float, z: float) -> float:
    """P_x[sup X(hat_tau_a) - x <= z] = 1 - W((a - z) /\\ a) / W(a)."""
    if a <= 0:
        raise ValueError("a must be positive")
    return 1.0 - scale_value(engine, 0.0, min(a - z, a)) / scale_value(engine, 0.0, a)


# joint laws of times and drawups ---------------------------------------------------


def _no_new_extreme_factor(engine, a, q):
    """1 - lambda(a, q) int_0^a W^{(q)} / W^{(q)}(a)."""
    lam = _lam(engine, q, a)
    return 1.0 - lam * scalar(engine.W_int(q, a)) / scalar(engine.W(q, a))


def m_factor(engine: ScaleEngine, a: float, q, theta=None):
    """M = E[exp(-q tau_a - theta (Y(tau_a) - a))], by default theta = lambda(a, q).

    Computed from the tilted scale functions at index p = q - psi(theta):
    exp(theta a) [Z_t(a) - W_t(a) (p W_t(a) + theta Z_t(a)) / (W_t'(a) + theta W_t(a))].
    q may be complex with Re q >= 0.
    """
    if a <= 0 or np.real(q) < 0:
        raise ValueError("need a > 0 and q >= 0")
    lam = _lam(engine, q, a) if theta is None else theta
    p = q - scalar(engine.spec.psi(lam))
    Zl = 1.0 + p * scalar(engine.tilted_integral(lam, q, a))
    W = scalar(engine.W(q, a))
    # exp(theta a) W_t = W and exp(theta a)(W_t' + theta W_t) = W'
    Ze = np.exp(lam * a) * Zl
    return Ze - W * (p * W + lam * Ze) / scalar(engine.W_prime(q, a))


def joint_tau_hatY(engine: ScaleEngine, a: float, q: float, b: float) -> float:
    """E[exp(-q tau_a); hat_Y(tau_a) > b]."""
    if b < 0:
        raise ValueError("b must be nonnegative")
    lam = _lam(engine, q, a)
    return math.exp(-b * lam) * _no_new_extreme_factor(engine, a, q) * m_factor(engine, a, q)


def hatY_atom(engine: ScaleEngine, a: float) -> float:
    """P[hat_Y(tau_a) = 0]: tau_a happens at a new running minimum."""
    return 1.0 - _no_new_extreme_factor(engine, a, 0.0) * m_factor(engine, a, 0.0)


def Y_at_hat_tau_atom(engine: ScaleEngine, a: float) -> float:
    """P[Y(hat_tau_a) = 0]: hat_tau_a happens at a new running maximum."""
    return _no_new_extreme_factor(engine, a, 0.0)


def hat_tau_Y_joint_laplace(engine: ScaleEngine, a: float, q: float, theta: float,
                            form: str = "auto") -> float:
    """E[exp(-q hat_tau_a - theta Y(hat_tau_a))].

    ``form="tilted"`` uses tilted scale functions (any theta >= 0);
    ``form="shifted"`` uses Laplace transforms of W(a + .) and needs theta > Phi(q).
    The tilted form cancels badly once theta*a is large, so ``"auto"`` takes
    the shifted form for theta > Phi(q) + 1/a.
    """
    if q < 0 or theta < 0:
        raise ValueError("q and theta must be nonnegative")
    if form == "auto":
        form = "shifted" if theta > engine.spec.phi(q) + 1.0 / a else "tilted"
    W = float(engine.W(q, a))
    IW = float(engine.W_int(q, a))
    if form == "tilted":
        if theta == 0:
            return 1.0 - q * IW / float(engine.Z(q, a))
        p = q - float(engine.spec.psi(theta))
        Zt = 1.0 + p * float(engine.tilted_integral(theta, q, a))
        return 1.0 - (p * math.exp(-a * theta) / Zt + theta / W) * IW
    if form == "shifted":
        if not theta > engine.spec.phi(q):
            raise ValueError("the shifted form needs theta > Phi(q)")
        S = float(np.real(engine.shifted_transform(q, a, theta)[0]))
        # int e^{-theta z} W'(a+z) dz = theta S - W(a)
        return 1.0 - (theta - W / S) * IW / W
    raise ValueError("form must be 'tilted' or 'shifted'")


def time_laplace_new_max(engine: ScaleEngine, a: float, q):
    """int e^{-qt} P[hat_tau_a < t, hat_tau_a at a running maximum] dt (Re q > 0)."""
    if np.real(q) <= 0:
        raise ValueError("q must be positive")
    return _no_new_extreme_factor(engine, a, q) / q


def time_laplace_new_min(engine: ScaleEngine, a: float, q):
    """int e^{-qt} P[tau_a < t, tau_a at a running minimum] dt (Re q > 0)."""
    if np.real(q) <= 0:
        raise ValueError("q must be positive")
    off = _no_new_extreme_factor(engine, a, q) * m_factor(engine, a, q)
    return (taua_laplace(engine, q, a) - off) / q


def time_laplace_off_min(engine: ScaleEngine, a: float, q):
    """int e^{-qt} P[tau_a < t, hat_Y(tau_a) > 0] dt, the complement of new_min (Re q > 0)."""
    if np.real(q) <= 0:
        raise ValueError("q must be positive")
    return _no_new_extreme_factor(engine, a, q) * m_factor(engine, a, q) / q


# batch export -------------------------------------------------------------------

_CSV_COLUMNS = ("kind", "x", "a", "q", "r", "u", "v", "y", "h", "value",
                "entry_factor", "F_factor", "resolvent_factor", "jump_factor", "creep_factor")


def evaluate_batch(engine: ScaleEngine, queries: Iterable[tuple[str, SextupleQuery]]):
    """Evaluate (kind, query) pairs; kind is 'overshoot', 'atom' or 'creep'."""
    funcs = {"overshoot": sextuple_overshoot_density, "atom": sextuple_overshoot_atom,
             "creep": sextuple_creep_density}
    return [(kind, qy, funcs[kind](engine, qy)) for kind, qy in queries]


def write_laws_csv(path, results) -> None:
    """Write evaluate_batch output with one column per factor."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_COLUMNS)
        for kind, qy, law in results:
            comps = dict(law.components)
            row = [kind, qy.x, qy.a, qy.q, qy.r, qy.u, qy.v, qy.y, qy.h, law.value]
            row += [comps.get(name, "") for name in _CSV_COLUMNS[10:]]
            w.writerow([repr(c) if isinstance(c, float) else c for c in row])
