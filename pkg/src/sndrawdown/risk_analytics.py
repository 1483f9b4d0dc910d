"""Drawdown and rally risk for exponential Levy price models S = S0 exp(X).

A relative drawdown of size alpha is the log-drawdown level
a = -log(1 - alpha); a relative rally of size beta is b = log(1 + beta).
D = tau_a is the first time the price sits a fraction alpha below its
running maximum and U = hat_tau_b the first time it sits a fraction beta
above its running minimum.

Finite-horizon numbers come from numerical inversion of Laplace transforms
in time (and in space for the rally-first probability). Every report carries
the inversion error estimate and the number of transform evaluations.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .drawdown_laws import (Y_at_hat_tau_atom, hatY_atom, m_factor, time_laplace_new_max,
                            time_laplace_new_min)
from .fluctuation_identities import scalar, taua_laplace
from .laplace_inversion import (DEFAULT_CONFIG, InversionConfig, InversionError, euler_nodes,
                                invert, invert_2d)
from .process_models import Family, ProcessSpec
from .scale_functions import ScaleEngine
from .special_functions import (DEFAULT_TOL, SeriesError, SeriesTolerance, mittag_leffler,
                                mittag_leffler_prime, scaled_upper_gamma_ratio)

# inversions whose error estimate exceeds this are refused
MAX_INVERSION_ERROR = 1e-4
# relative gap below which a and b count as the same level
_SAME_LEVEL = 1e-12


@dataclass(frozen=True)
class PriceModel:
    spec: ProcessSpec
    S0: float = 1.0

    def __post_init__(self):
        if not self.S0 > 0:
            raise ValueError("S0 must be positive")


@dataclass(frozen=True)
class RiskQuery:
    """Relative drawdown alpha, relative rally beta and horizon (math.inf allowed).

    Operations that need only one of the two sizes accept the other as None.
    """
    alpha: float | None = None
    beta: float | None = None
    horizon: float = math.inf

    def __post_init__(self):
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def a(self) -> float:
        if self.alpha is None:
            raise ValueError("query has no drawdown size alpha")
        return -math.log1p(-self.alpha)

    @property
    def b(self) -> float:
        if self.beta is None:
            raise ValueError("query has no rally size beta")
        return math.log1p(self.beta)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.horizon)


@dataclass(frozen=True)
class RiskReport:
    query: RiskQuery
    value: float
    error_estimate: float
    method: str
    evaluations: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        # numpy scalars would leak into CSV as np.float64(...)
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "error_estimate", float(self.error_estimate))
        object.__setattr__(self, "evaluations", int(self.evaluations))
        object.__setattr__(self, "details", {k: v.item() if isinstance(v, np.generic) else v
                                             for k, v in self.details.items()})

    def to_dict(self) -> dict[str, Any]:
        q = asdict(self.query)
        q["horizon"] = _json_float(q["horizon"])
        return {"query": q, "value": self.value, "error_estimate": self.error_estimate,
                "method": self.method, "evaluations": self.evaluations,
                "details": {k: _json_float(v) for k, v in self.details.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RiskReport":
        q = dict(data["query"])
        q["horizon"] = float(q["horizon"])
        return cls(RiskQuery(**q), float(data["value"]), float(data["error_estimate"]),
                   data["method"], int(data["evaluations"]), dict(data.get("details", {})))


def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


REPORT_COLUMNS = ("alpha", "beta", "horizon", "value", "error_estimate", "method", "evaluations")


def write_reports_csv(path, reports) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([r.query.alpha, r.query.beta, r.query.horizon, repr(r.value),
                        repr(r.error_estimate), r.method, r.evaluations])


# inversion helpers ---------------------------------------------------------------


def _engine(model: PriceModel | ScaleEngine) -> ScaleEngine:
    if isinstance(model, ScaleEngine):
        return model
    return ScaleEngine(model.spec)


def _vectorise(f):
    def F(s):
        s = np.asarray(s)
        return np.array([f(complex(v)) for v in s.ravel()], dtype=complex).reshape(s.shape)
    return F


def _checked(res, what):
    if not np.isfinite(res.value) or res.error > MAX_INVERSION_ERROR:
        raise InversionError(f"{what}: inversion error {res.error:.2e} above {MAX_INVERSION_ERROR:.0e}")
    return res


def _clip01(v):
    return min(1.0, max(0.0, v))


def _time_inversion(transform, T, config, shift=0.0, what="inversion"):
    res = _checked(invert(_vectorise(transform), T, config, shift), what)
    return res


# Short horizons put the Bromwich contour at large |q|, where W^{(q)}(a) grows
# like exp(Phi(q) a) and the transforms become differences of huge terms.
# Those inversions are refused and, unless fallback_paths = 0, replaced by a
# simulation of the same event truncated at the horizon.
_NUMERICAL_FAILURES = (InversionError, SeriesError, OverflowError, ZeroDivisionError)
DEFAULT_FALLBACK_PATHS = 100_000


def _simulate_event(model, query, functional, paths, seed, a=None, b=None):
    from .mc_oracle import SimConfig, estimate, simulate
    T = query.horizon
    cfg = SimConfig(dt=min(1e-2, T / 200.0), n_paths=paths, seed=seed, t_max=T)
    fun = simulate(_spec(model), cfg, a, b)
    est = estimate(functional, fun)
    return RiskReport(query, est.value, est.standard_error, "simulation", paths,
                      {"dt": cfg.dt, "truncated_at_T": True})


def _with_fallback(compute, model, query, functional, fallback_paths, seed, a=None, b=None):
    try:
        return compute()
    except _NUMERICAL_FAILURES as exc:
        if fallback_paths <= 0:
            raise
        rep = _simulate_event(model, query, functional, fallback_paths, seed, a, b)
        rep.details["inversion_failure"] = str(exc)
        return rep


# (i) and (ii): new extremes at the drawdown / rally time --------------------------


def prob_new_min_at_drawdown(model, query: RiskQuery, config: InversionConfig = DEFAULT_CONFIG,
                             fallback_paths: int = DEFAULT_FALLBACK_PATHS, seed: int = 20240101) -> RiskReport:
    """P[S(D) is a running minimum, D < T] with D the first relative drawdown of size alpha."""
    engine = _engine(model)
    a = query.a
    if not query.finite:
        return RiskReport(query, _clip01(hatY_atom(engine, a)), 0.0, "closed_form", 1)

    def compute():
        res = _time_inversion(lambda q: time_laplace_new_min(engine, a, q), query.horizon, config,
                              what="new minimum at drawdown")
        return RiskReport(query, _clip01(res.value), res.error, "laplace_inversion", res.evaluations)

    T = query.horizon
    return _with_fallback(compute, model, query,
                          lambda p: (p.tau_a < T) & (p.hatY_at_tau == 0.0), fallback_paths, seed, a=a)


def prob_new_max_at_drawup(model, query: RiskQuery, config: InversionConfig = DEFAULT_CONFIG,
                           fallback_paths: int = DEFAULT_FALLBACK_PATHS, seed: int = 20240101) -> RiskReport:
    """P[S(U) is a running maximum, U < T] with U the first relative rally of size beta."""
    engine = _engine(model)
    b = query.b
    if not query.finite:
        return RiskReport(query, _clip01(Y_at_hat_tau_atom(engine, b)), 0.0, "closed_form", 1)

    def compute():
        res = _time_inversion(lambda q: time_laplace_new_max(engine, b, q), query.horizon, config,
                              what="new maximum at drawup")
        return RiskReport(query, _clip01(res.value), res.error, "laplace_inversion", res.evaluations)

    T = query.horizon
    return _with_fallback(compute, model, query,
                          lambda p: (p.hat_tau_b < T) & (p.Y_at_hat_tau == 0.0), fallback_paths, seed, b=b)


def prob_drawdown_before(model, query: RiskQuery, config: InversionConfig = DEFAULT_CONFIG,
                         fallback_paths: int = DEFAULT_FALLBACK_PATHS, seed: int = 20240101) -> RiskReport:
    """P[D < T] from the transform E[exp(-q tau_a)] / q."""
    engine = _engine(model)
    a = query.a
    if not query.finite:
        return RiskReport(query, 1.0, 0.0, "closed_form", 0)

    def compute():
        res = _time_inversion(lambda q: taua_laplace(engine, q, a) / q, query.horizon, config,
                              what="drawdown time")
        return RiskReport(query, _clip01(res.value), res.error, "laplace_inversion", res.evaluations)

    T = query.horizon
    return _with_fallback(compute, model, query, lambda p: p.tau_a < T, fallback_paths, seed, a=a)


# (iii) expected drawdown at D -------------------------------------------------------


def expected_drawdown_transform(engine: ScaleEngine, S0: float, a: float, q):
    """int e^{-qt} E[(sup S - S)(D); D < t] dt for Re q > max(psi(1), 0) and lambda(a, q) > 1.

    With h_q(x) = 1 - (1 - psi(1)/q) e^{-x} the transform is
    S0 lam/(lam-1) int_0^a h_q W - S0/(lam-1) [int_0^a h_q(x) W(dx) - 1/q],
    where the Stieltjes integral includes the atom h_q(0) W(0) and is
    integrated by parts: h_q(a) W(a) - int_0^a h_q' W.
    """
    psi1 = float(engine.spec.psi(1.0))
    k = 1.0 - psi1 / q
    W = scalar(engine.W(q, a))
    lam = scalar(engine.W_prime(q, a)) / W
    IW = scalar(engine.W_int(q, a))
    tilt = scalar(engine.tilted_integral(1.0, q, a))
    int_hW = IW - k * tilt
    int_h_dW = (1.0 - k * math.exp(-a)) * W - k * tilt
    return S0 * lam / (lam - 1.0) * int_hW - S0 / (lam - 1.0) * (int_h_dW - 1.0 / q)


def expected_drawdown_transform_via_overshoot(engine: ScaleEngine, S0: float, a: float, q):
    """Same transform written as S0/q lam/(lam-1) E[e^{-q tau_a} (1 - e^{-Y(tau_a)})]."""
    lam = scalar(engine.lambda_ratio(q, a))
    overshoot = math.exp(-a) * m_factor(engine, a, q, theta=1.0)
    return S0 / q * lam / (lam - 1.0) * (taua_laplace(engine, q, a) - overshoot)


def _expected_dd_shift(engine, a):
    """Real abscissa c with c > max(psi(1), 0) and lambda(a, c) > 1."""
    c = max(float(engine.spec.psi(1.0)), 0.0) + 0.05
    for _ in range(200):
        if float(engine.lambda_ratio(c, a)) > 1.0 + 1e-3:
            return c
        c = 2.0 * c + 0.1
    raise InversionError("no contour with lambda(a, q) > 1 found")


def expected_drawdown_at_D(model: PriceModel, query: RiskQuery,
                           config: InversionConfig = DEFAULT_CONFIG,
                           fallback_paths: int = DEFAULT_FALLBACK_PATHS, seed: int = 20240101) -> RiskReport:
    """E[(sup S - S)(D) 1{D < T}] for the first relative drawdown D of size alpha."""
    engine = _engine(model)
    a = query.a
    S0 = model.S0
    if not query.finite:
        lam0 = float(engine.lambda_ratio(0.0, a))
        if lam0 <= 1.0:
            return RiskReport(query, math.inf, 0.0, "closed_form", 1,
                              {"note": "E[exp(sup X)] diverges: lambda(a, 0) <= 1"})
        M1 = m_factor(engine, a, 0.0, theta=1.0)
        value = S0 * lam0 / (lam0 - 1.0) * (1.0 - math.exp(-a) * float(np.real(M1)))
        return RiskReport(query, value, 0.0, "closed_form", 1)

    def compute():
        shift = _expected_dd_shift(engine, a)
        res = invert(_vectorise(lambda q: expected_drawdown_transform(engine, S0, a, q)),
                     query.horizon, config, shift)
        # the error bound scales with S0
        if not np.isfinite(res.value) or res.error > MAX_INVERSION_ERROR * S0:
            raise InversionError(f"expected drawdown: inversion error {res.error:.2e}")
        return RiskReport(query, max(res.value, 0.0), res.error, "laplace_inversion", res.evaluations,
                          {"shift": shift})

    T = query.horizon
    return _with_fallback(compute, model, query,
                          lambda p: np.where(p.tau_a < T, S0 * (np.exp(p.X_bar) - np.exp(p.X_at_tau)), 0.0),
                          fallback_paths, seed, a=a)


# (iv) drawdown before rally -----------------------------------------------------------


def _cdf_Y_at_hat_tau(engine: ScaleEngine, b: float, x: float, config: InversionConfig):
    """P[Y(hat_tau_b) <= x] for x > 0, inverting E[e^{-theta Y}] / theta in theta."""
    W = float(engine.W(0.0, b))
    IW = float(engine.W_int(0.0, b))
    shift = engine.spec.phi(0.0) + 1.0

    def G(theta):
        S = engine.shifted_transform(0.0, b, theta)
        return 1.0 / theta + (1.0 / (theta * S) - 1.0 / W) * IW

    return _checked(invert(G, x, config, shift, real=True), "drawup-time drawdown law")


def drawdown_before_rally_infinite(engine: ScaleEngine, a: float, b: float,
                                   config: InversionConfig = DEFAULT_CONFIG):
    """P[tau_a < hat_tau_b] for a >= b, as (value, error, evaluations)."""
    if a < b * (1.0 - _SAME_LEVEL):
        raise ValueError("the drawdown level must be at least the rally level")
    if a <= b * (1.0 + _SAME_LEVEL):
        W = float(engine.W(0.0, a))
        return float(engine.W_prime(0.0, a)) * float(engine.W_int(0.0, a)) / (W * W), 0.0, 1
    res = _cdf_Y_at_hat_tau(engine, b, a - b, config)
    return _clip01(1.0 - res.value), res.error, res.evaluations


def rally_first_transform(engine: ScaleEngine, b: float, theta, q):
    """int int e^{-theta x - q t} P[Y(hat_tau_b) <= x, hat_tau_b < t] dx dt."""
    W = scalar(engine.W(q, b))
    IW = scalar(engine.W_int(q, b))
    S = engine.shifted_transform(q, b, theta)
    return (1.0 + (1.0 / S - theta / W) * IW) / (q * theta)


def _rally_first_finite(engine, a, b, T, config):
    """P[hat_tau_b < tau_a, hat_tau_b < T] by double inversion."""
    nodes = euler_nodes(T, config)
    qmax = float(np.max(np.abs(nodes)))
    # |W^{(q)}(x)| <= W^{(|q|)}(x) grows at most like exp(Phi(|q|) x)
    shift_theta = engine.spec.phi(qmax) + 1.0
    return _checked(invert_2d(lambda th, q: rally_first_transform(engine, b, th, q), a - b, T, config,
                              shift_theta=shift_theta), "rally-first probability")


def drawdown_before_rally(model, query: RiskQuery, config: InversionConfig = DEFAULT_CONFIG,
                          paths: int = 0, seed: int = 20240101,
                          fallback_paths: int = DEFAULT_FALLBACK_PATHS) -> RiskReport:
    """P[D < U (, D < T)] with D, U the first relative drawdown and rally.

    Infinite horizon: exact, through the law of the drawdown at the rally time.
    Finite horizon: the inversions give P[U < D, U < T] and P[D < T], which
    only bracket P[D < U, D < T]:
        P[D < T] - P[U < D, U < T] <= P[D < U, D < T] <= min(P[D < T], P[D < U]).
    The report value is the midpoint and error_estimate the half width
    (method "bounds"); with ``paths > 0`` a simulation estimate is reported
    instead (method "simulation") and the bounds go to details.
    """
    engine = _engine(model)
    a, b = query.a, query.b
    if a < b * (1.0 - _SAME_LEVEL):
        raise ValueError("drawdown_before_rally needs a >= b (alpha >= beta / (1 + beta))")
    same = a <= b * (1.0 + _SAME_LEVEL)
    p_inf, err_inf, ev_inf = drawdown_before_rally_infinite(engine, a, b, config)
    if not query.finite:
        return RiskReport(query, p_inf, err_inf, "closed_form" if same else "laplace_inversion", ev_inf)
    T = query.horizon

    def drawdown_first(p):
        return p.tau_a < np.minimum(p.hat_tau_b, T)

    try:
        tau = prob_drawdown_before(engine, query, config, fallback_paths=0)
        if same:
            # on this event Y(hat_tau_a) = 0, the atom the x-inversion cannot see
            rally = _rally_first_equal_levels(engine, a, T, config)
        else:
            rally = _rally_first_finite(engine, a, b, T, config)
    except _NUMERICAL_FAILURES as exc:
        if max(paths, fallback_paths) <= 0:
            raise
        rep = _simulate_event(model, query, drawdown_first, max(paths, fallback_paths), seed, a, b)
        rep.details.update({"p_drawdown_first_infinite": p_inf, "inversion_failure": str(exc)})
        return rep
    upper = min(tau.value, p_inf)
    # at long horizons inversion noise can push the lower end past the upper
    lower = min(max(0.0, tau.value - rally.value), upper)
    err = abs(tau.error_estimate) + abs(rally.error) + abs(err_inf)
    details = {"p_drawdown_before_T": tau.value, "p_rally_first_before_T": _clip01(rally.value),
               "p_drawdown_first_infinite": p_inf, "lower": lower, "upper": upper}
    evals = tau.evaluations + rally.evaluations + ev_inf
    if paths > 0:
        rep = _simulate_event(model, query, drawdown_first, paths, seed, a, b)
        rep.details.update(details)
        return RiskReport(query, rep.value, rep.error_estimate, "simulation", evals + paths, rep.details)
    return RiskReport(query, 0.5 * (lower + upper), 0.5 * (upper - lower) + err, "bounds", evals, details)


def _spec(model):
    return model.spec if isinstance(model, (PriceModel, ScaleEngine)) else model


def _rally_first_equal_levels(engine, a, T, config):
    """P[hat_tau_a < tau_a, hat_tau_a < T]: Y(hat_tau_a) = 0 exactly on that event."""
    return _checked(invert(_vectorise(lambda q: _no_drawdown_at_rally(engine, a, q)), T, config),
                    "rally-first probability")


def _no_drawdown_at_rally(engine, a, q):
    # int e^{-qt} P[hat_tau_a < t, Y(hat_tau_a) = 0] dt
    return time_laplace_new_max(engine, a, q)


# Carr-Wu closed forms -------------------------------------------------------------------


def _check_carr_wu(spec: ProcessSpec):
    if spec.family is not Family.STABLE_DRIFT:
        raise ValueError("Carr-Wu formulas need the stable_drift family")


def carr_wu_symmetric(model: PriceModel, x_dd: float, tol: SeriesTolerance = DEFAULT_TOL) -> RiskReport:
    """P[D < U] for equal relative levels from the Mittag-Leffler closed form.

    With A = (mu / sigma^alpha) a^{alpha-1} and beta = alpha - 1:
    beta A E'_{beta,1}(-A) (1 - E_{beta,2}(-A)) / (1 - E_{beta,1}(-A))^2.
    mu = 0 returns the driftless value (alpha - 1) / alpha.
    """
    spec = model.spec
    _check_carr_wu(spec)
    query = RiskQuery(alpha=x_dd, beta=x_dd / (1.0 - x_dd))  # log(1 + beta) = a
    a = query.a
    al = spec.alpha
    if spec.mu == 0.0:
        return RiskReport(query, (al - 1.0) / al, 0.0, "closed_form", 0, {"A": 0.0})
    A = spec.mu / spec.sigma ** al * a ** (al - 1.0)
    beta = al - 1.0
    d1 = -float(mittag_leffler(beta, 1.0, -A, tol, skip=1))  # 1 - E_{beta,1}(-A)
    d2 = -float(mittag_leffler(beta, 2.0, -A, tol, skip=1))  # 1 - E_{beta,2}(-A)
    e1p = float(mittag_leffler_prime(beta, 1.0, -A, tol))
    value = beta * A * e1p * d2 / (d1 * d1)
    return RiskReport(query, value, 0.0, "closed_form", 3, {"A": A})


def carr_wu_crash_transform(spec: ProcessSpec, b: float, theta: complex,
                            tol: SeriesTolerance = DEFAULT_TOL) -> complex:
    """Transform in x of P[Y(hat_tau_b) <= x] for the stable process with drift.

    1/theta - (mu e^{-b theta} / Sigma + 1 / W(b)) int_0^b W, where
    Sigma = sum_{n>=1} (c / theta^{alpha-1})^n Gamma(s_n, b theta) / Gamma(s_n),
    c = -mu / sigma^alpha and s_n = n (alpha - 1) + 1. The series needs
    |c / theta^{alpha-1}| < 1.
    """
    _check_carr_wu(spec)
    engine = ScaleEngine(spec)
    return _crash_transform(spec, b, complex(theta), float(engine.W(0.0, b)),
                            float(engine.W_int(0.0, b)), tol, {})


def carr_wu_crash_prob(model: PriceModel, x_dd: float, y_up: float,
                       config: InversionConfig = DEFAULT_CONFIG,
                       tol: SeriesTolerance = DEFAULT_TOL) -> RiskReport:
    """P[D < U] for the stable process with drift, a > b, from the crash series.

    The contour sits right of (2 |c|)^{1/(alpha-1)} so the series ratio
    stays below 1/2 in modulus.
    """
    spec = model.spec
    _check_carr_wu(spec)
    query = RiskQuery(alpha=x_dd, beta=y_up)
    a, b = query.a, query.b
    if not a > b:
        raise ValueError("carr_wu_crash_prob needs a > b")
    al = spec.alpha
    c = abs(spec.mu) / spec.sigma ** al
    shift = max((2.0 * c) ** (1.0 / (al - 1.0)), spec.phi(0.0) + 1.0)
    engine = ScaleEngine(spec)
    W = float(engine.W(0.0, b))
    IW = float(engine.W_int(0.0, b))
    cache = {}

    def F(theta):
        theta = np.asarray(theta)
        out = np.empty(theta.shape, dtype=complex)
        for i, th in enumerate(theta.ravel()):
            out.flat[i] = _crash_transform(spec, b, complex(th), W, IW, tol, cache)
        return out

    res = _checked(invert(F, a - b, config, shift), "Carr-Wu crash probability")
    return RiskReport(query, _clip01(1.0 - res.value), res.error, "laplace_inversion", res.evaluations,
                      {"shift": shift})


def _crash_transform(spec, b, theta, W, IW, tol, cache):
    key = theta
    if key in cache:
        return cache[key]
    al = spec.alpha
    z = (-spec.mu / spec.sigma ** al) / theta ** (al - 1.0)
    if abs(z) >= 1.0:
        raise SeriesError("Carr-Wu crash series diverges on the contour")
    total = 0j
    zn = 1.0 + 0j
    # mu e^{-b theta} / Sigma = mu / sum z^n R_n with R_n = e^{b theta} Gamma(s_n, b theta) / Gamma(s_n)
    for n in range(1, tol.max_terms):
        zn *= z
        term = zn * scaled_upper_gamma_ratio(n * (al - 1.0) + 1.0, b * theta)
        total += term
        if n > 3 and abs(term) < tol.abs_tol * max(1.0, abs(total)):
            break
    else:
        raise SeriesError("Carr-Wu crash series did not converge")
    val = 1.0 / theta - (spec.mu / total + 1.0 / W) * IW
    cache[key] = val
    return val
