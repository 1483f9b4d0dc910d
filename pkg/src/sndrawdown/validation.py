"""Acceptance checks: analytic identities, backend agreement and simulation oracles.

Each criterion function returns a list of CheckResult. ``run_suite`` runs
them in order; ``quick=True`` keeps the analytic parts and runs the
simulations with fewer paths (the stable-process KS runs and the
step-halving runs are skipped).
"""
from __future__ import annotations

import contextlib
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import mc_oracle as mc
from .drawdown_laws import (F_factor, SextupleQuery, Y_at_hat_tau_atom, hat_tau_Y_joint_laplace,
                            hat_tau_joint_min_laplace, hatY_atom, max_at_hat_tau_cdf,
                            min_before_tau_cdf, quadruple_transform, sextuple_creep_density,
                            sextuple_overshoot_density)
from .fluctuation_identities import delta_creep, normalization_c, taua_laplace
from .laplace_inversion import invert, invert_2d
from .process_models import ProcessSpec
from .risk_analytics import (PriceModel, RiskQuery, carr_wu_crash_prob, carr_wu_symmetric,
                             drawdown_before_rally)
from .scale_functions import ScaleEngine, W_carr_wu, W_conv_series
from .special_functions import SeriesTolerance

SEED = 20240101


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    passed: bool
    measured: float
    tolerance: float
    seconds: float = 0.0
    detail: str = ""
    expected_failure: bool = False

    @property
    def status(self) -> str:
        if self.expected_failure:
            return "XPASS" if self.passed else "XFAIL"
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        extra = f"  ({self.detail})" if self.detail else ""
        return (f"{self.status:5s} [{self.criterion:2d}] {self.name}: measured {self.measured:.3g}"
                f" vs tolerance {self.tolerance:.3g}, {self.seconds:.1f}s{extra}")


def _result(criterion, name, measured, tol, t0, detail="", expected_failure=False, below=True):
    ok = bool(measured < tol) if below else bool(measured > tol)
    return CheckResult(criterion, name, ok, float(measured), float(tol), time.perf_counter() - t0,
                       detail, expected_failure)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


FAMILIES = {
    "brownian_drift": ProcessSpec.brownian(0.1, 0.5),
    "jump_diffusion_exp": ProcessSpec.jump_diffusion(0.2, 1.0, 1.0, 2.0),
    "stable_neg": ProcessSpec.stable(1.5, 1.0),
    "stable_drift": ProcessSpec.stable_drift(0.1, 1.0, 1.5),
}
JD = FAMILIES["jump_diffusion_exp"]


# 1 --------------------------------------------------------------------------------


def check_laplace_identity(quick: bool = False) -> list[CheckResult]:
    """int_0^L e^{-theta x} W(x) dx against 1 / (psi(theta) - q).

    L = 40 / (theta - Phi(q)) leaves a tail of order e^{-40}. Stable
    series run with a large budget: their arguments are positive here, so
    there is no cancellation.
    """
    out = []
    for name, spec in FAMILIES.items():
        t0 = time.perf_counter()
        engine = ScaleEngine(spec, tolerance=SeriesTolerance(budget=1e4))
        worst = 0.0
        for q in (0.0, 0.5, 2.0):
            phi = spec.phi(q)
            for gap in (0.5, 1.0, 2.0, 4.0, 8.0):
                theta = phi + gap
                val, _ = quad(lambda x: math.exp(-theta * x) * float(engine.W(q, x)),
                              0.0, 40.0 / gap, limit=400, epsabs=0.0, epsrel=1e-10)
                worst = max(worst, _rel(val, 1.0 / (float(spec.psi(theta)) - q)))
        out.append(_result(1, f"Laplace identity of W, {name}", worst, 1e-6, t0))
    return out


# 2 --------------------------------------------------------------------------------


def check_backend_agreement(quick: bool = False) -> list[CheckResult]:
    spec = FAMILIES["stable_drift"]
    xs = np.linspace(0.15, 3.0, 20)
    t0 = time.perf_counter()
    worst_inv = worst_conv = 0.0
    for q in (0.5, 2.0):
        ref = W_carr_wu(spec, q, xs)
        inv = ScaleEngine(spec, "inversion").W(q, xs)
        conv = W_conv_series(spec, q, xs)
        worst_inv = max(worst_inv, float(np.max(np.abs(inv / ref - 1))))
        worst_conv = max(worst_conv, float(np.max(np.abs(conv / ref - 1))))
    return [_result(2, "series vs inversion backend", worst_inv, 1e-5, t0),
            _result(2, "series vs convolution backend", worst_conv, 1e-5, t0)]


# 3 --------------------------------------------------------------------------------


def check_driftless_symmetry(quick: bool = False) -> list[CheckResult]:
    spec = ProcessSpec.brownian(0.0, 1.0)
    a = 0.5
    t0 = time.perf_counter()
    beta = math.exp(a) - 1.0
    query = RiskQuery(alpha=-math.expm1(-a), beta=beta)
    p = drawdown_before_rally(PriceModel(spec), query).value
    out = [_result(3, "driftless BM P[tau_a < hat_tau_a] closed form", abs(p - 0.5), 1e-12, t0)]
    t0 = time.perf_counter()
    n = 50_000 if quick else 1_000_000
    paths = mc.simulate(spec, mc.SimConfig(dt=1e-2, n_paths=n, seed=SEED), a, a)
    est = mc.estimate(lambda p: p.tau_a < p.hat_tau_b, paths)
    out.append(_result(3, f"driftless BM symmetry by simulation ({n} paths)",
                       abs(est.value - 0.5) / est.standard_error, 3.0, t0,
                       f"estimate {est.value:.5f} +- {est.standard_error:.5f}, in SE units"))
    return out


# 4 --------------------------------------------------------------------------------


def check_stable_marginals(quick: bool = False) -> list[CheckResult]:
    alpha, a = 1.5, 1.0
    spec = ProcessSpec.stable(alpha, 1.0)
    engine = ScaleEngine(spec)
    zs = np.linspace(0.0, a, 41)
    t0 = time.perf_counter()
    err_min = max(abs(min_before_tau_cdf(engine, a, z) - (z / a) ** (alpha - 1)) for z in zs)
    out = [_result(4, "stable infimum-before-tau cdf = (z/a)^(alpha-1)", err_min, 1e-12, t0)]
    t0 = time.perf_counter()
    err_max = max(abs(max_at_hat_tau_cdf(engine, a, z) - (1 - (1 - z / a) ** (alpha - 1))) for z in zs)
    out.append(_result(4, "stable supremum-at-hat-tau cdf = 1-(1-z/a)^(alpha-1)", err_max, 1e-12, t0))
    if quick:
        return out

    n = 1_000_000
    t0 = time.perf_counter()
    paths = mc.simulate(spec, mc.SimConfig(n_paths=n, seed=SEED), a, a)
    ks_max = mc.ks_distance(paths.X_bar_hat, lambda z: 1 - (1 - np.clip(z, 0, a) / a) ** (alpha - 1))
    out.append(_result(4, f"simulated sup at hat_tau_a, KS ({n} paths)", ks_max, 5e-3, t0))
    depth = -paths.X_low_pre
    ks_min = mc.ks_distance(depth, lambda z: (np.clip(z, 0, a) / a) ** (alpha - 1))
    out.append(_result(4, f"simulated infimum before tau_a, KS ({n} paths)", ks_min, 5e-3, t0,
                       "the formula is the joint law with sup X(tau_a) >= a - z; "
                       "with downward jumps the marginal is larger", expected_failure=True))
    # the joint event the formula describes
    worst = 0.0
    for z in (0.01, 0.05, 0.1, 0.25, 0.5, 0.75):
        freq = np.mean((depth <= z) & (paths.X_bar >= a - z))
        worst = max(worst, abs(freq - (z / a) ** (alpha - 1)))
    out.append(_result(4, "simulated joint event {depth <= z, sup >= a - z}, sup error", worst, 5e-3, t0))
    return out


# 5 --------------------------------------------------------------------------------


def check_exponential_supremum(quick: bool = False) -> list[CheckResult]:
    mu, s2, a = 1.0, 2.0, 1.0
    spec = ProcessSpec.brownian(mu, s2)
    k = 2 * mu / s2
    rate = k / math.expm1(k * a)
    n = 50_000 if quick else 1_000_000
    t0 = time.perf_counter()
    paths = mc.simulate(spec, mc.SimConfig(dt=1e-2, n_paths=n, seed=SEED + 5), a)
    ks = mc.ks_distance(paths.X_bar, lambda z: -np.expm1(-rate * np.maximum(z, 0)))
    tol = 5e-3 if not quick else 1.63 / math.sqrt(n)
    return [_result(5, f"BM sup at tau_a is Exp({rate:.4f}), KS ({n} paths)", ks, tol, t0)]


# 6 --------------------------------------------------------------------------------


def check_normalization(quick: bool = False) -> list[CheckResult]:
    out = []
    for name, spec, tol in (("jump_diffusion_exp", JD, 1e-4), ("stable_neg", FAMILIES["stable_neg"], 1e-3),
                            ("stable_drift", FAMILIES["stable_drift"], 1e-3)):
        t0 = time.perf_counter()
        c = normalization_c(ScaleEngine(spec), 1.0)
        out.append(_result(6, f"normalization c(a) = 1, {name}", abs(c - 1.0), tol, t0))
    return out


# 7 --------------------------------------------------------------------------------


def check_mass_decomposition(quick: bool = False) -> list[CheckResult]:
    """Integrate the overshoot density over (v, y, h), add the creep mass."""
    engine = ScaleEngine(JD)
    a = 1.0
    out = []
    for q in (0.0, 0.5):
        t0 = time.perf_counter()
        # the v-dependence sits in F only; integrate it on its own
        f0 = F_factor(engine, q, q, a, 0.0)
        v_mass, _ = quad(lambda v: F_factor(engine, q, q, a, v), 0.0, math.inf)

        def density(h, y):
            return sextuple_overshoot_density(engine, SextupleQuery(0.0, a, q, 0.0, v=0.0, y=y, h=h)).value

        yh = 0.0
        for lo, hi in ((0.0, 0.5), (0.5, a)):
            val, _ = _dblquad(density, lo, hi)
            yh += val
        creep_v, _ = quad(lambda v: sextuple_creep_density(engine, SextupleQuery(0.0, a, q, 0.0, v=v)).value,
                          0.0, math.inf)
        total = yh / f0 * v_mass + creep_v
        err = abs(total - taua_laplace(engine, q, a))
        out.append(_result(7, f"overshoot mass + creep mass = E[exp(-q tau_a)], q={q}", err, 1e-4, t0,
                           f"creep part {creep_v:.6f} vs {delta_creep(engine, q, a):.6f}"))
    return out


def _dblquad(f, y_lo, y_hi):
    from scipy.integrate import dblquad
    return dblquad(f, y_lo, y_hi, 0.0, math.inf, epsabs=1e-10, epsrel=1e-9)


# 8 --------------------------------------------------------------------------------


def check_quadruple_reductions(quick: bool = False) -> list[CheckResult]:
    a = 1.0
    worst_z = worst_tg = worst_theta = 0.0
    t0 = time.perf_counter()
    for spec in FAMILIES.values():
        engine = ScaleEngine(spec)
        for q in (0.3, 1.0):
            Z = float(engine.Z(q, a))
            worst_z = max(worst_z, _rel(quadruple_transform(engine, 0.0, a, q, 0.0, 0.0, 1.5 * a), 1 / Z))
            r = 0.4
            tg = float(engine.W(q + r, a)) / (float(engine.W(q, a)) * float(engine.Z(q + r, a)))
            worst_tg = max(worst_tg, _rel(quadruple_transform(engine, 0.0, a, q, r, 0.0, 1.5 * a), tg))
            worst_theta = max(worst_theta, _rel(hat_tau_Y_joint_laplace(engine, a, q, 0.0),
                                                hat_tau_joint_min_laplace(engine, a, q, 0.0)))
    return [_result(8, "quadruple law, r=u=0, v>a equals 1/Z(a)", worst_z, 1e-10, t0),
            _result(8, "quadruple law, u=0, v>a equals W_{q+r}/(W_q Z_{q+r})", worst_tg, 1e-10, t0),
            _result(8, "drawup-time/drawdown transform at theta=0 vs infimum transform at u=0",
                    worst_theta, 1e-10, t0)]


# 9 --------------------------------------------------------------------------------


def bm_atoms(mu: float, s2: float, a: float) -> tuple[float, float]:
    """(P[hat_Y(tau_a) = 0], P[Y(hat_tau_a) = 0]) for Brownian motion with drift."""
    if mu == 0.0:
        return 0.5, 0.5
    k = a * mu / s2
    den = (math.exp(-k) - math.exp(k)) ** 2
    return (math.exp(-2 * k) - 1 + 2 * k) / den, (math.exp(2 * k) - 1 - 2 * k) / den


def check_atoms(quick: bool = False) -> list[CheckResult]:
    a = 1.0
    out = []
    for mu in (0.0, 0.3, -0.5):
        spec = ProcessSpec.brownian(mu, 1.0)
        engine = ScaleEngine(spec)
        t0 = time.perf_counter()
        ref_min, ref_max = bm_atoms(mu, 1.0, a)
        err = max(abs(hatY_atom(engine, a) - ref_min), abs(Y_at_hat_tau_atom(engine, a) - ref_max))
        out.append(_result(9, f"BM(mu={mu}) atoms closed form", err, 1e-12, t0))
        t0 = time.perf_counter()
        n = 50_000 if quick else 200_000
        paths = mc.simulate(spec, mc.SimConfig(dt=1e-2, n_paths=n, seed=SEED + 9), a, a)
        e1 = mc.estimate(lambda p: p.hatY_at_tau == 0.0, paths)
        e2 = mc.estimate(lambda p: p.Y_at_hat_tau == 0.0, paths)
        z = max(abs(e1.value - ref_min) / e1.standard_error, abs(e2.value - ref_max) / e2.standard_error)
        out.append(_result(9, f"BM(mu={mu}) atoms by simulation ({n} paths)", z, 5.0, t0,
                           f"{e1.value:.4f}/{ref_min:.4f} and {e2.value:.4f}/{ref_max:.4f}, in SE units"))
    return out


# 10 -------------------------------------------------------------------------------


CARR_WU_PARAMS = ((0.1, 0.3, 1.5), (0.05, 0.2, 1.7), (-0.1, 0.3, 1.5))


def bm_equal_level_prob(mu: float, s2: float, a: float) -> float:
    """P[tau_a < hat_tau_a] for Brownian motion with drift."""
    return bm_atoms(mu, s2, a)[0]


def check_carr_wu(quick: bool = False) -> list[CheckResult]:
    x_dd, y_up = 0.3, 0.1
    models = [PriceModel(ProcessSpec.stable_drift(*p)) for p in CARR_WU_PARAMS]
    t0 = time.perf_counter()
    worst = 0.0
    for model in models:
        sym = carr_wu_symmetric(model, x_dd).value
        gen = drawdown_before_rally(model, RiskQuery(alpha=x_dd, beta=x_dd / (1 - x_dd))).value
        worst = max(worst, abs(sym - gen))
    out = [_result(10, "symmetric Carr-Wu formula vs scale-function route", worst, 1e-6, t0)]
    t0 = time.perf_counter()
    worst = 0.0
    for model in models:
        crash = carr_wu_crash_prob(model, x_dd, y_up).value
        gen = drawdown_before_rally(model, RiskQuery(alpha=x_dd, beta=y_up)).value
        worst = max(worst, abs(crash - gen))
    out.append(_result(10, "Carr-Wu crash series inversion vs scale-function route", worst, 1e-5, t0))
    t0 = time.perf_counter()
    mu, sigma = 0.1, 0.3
    near = carr_wu_symmetric(PriceModel(ProcessSpec.stable_drift(mu, sigma, 1.999)), x_dd).value
    # psi = (sigma theta)^2 at alpha = 2, i.e. Gaussian variance 2 sigma^2
    bm = bm_equal_level_prob(mu, 2 * sigma ** 2, -math.log1p(-x_dd))
    out.append(_result(10, "alpha=1.999 vs Brownian closed form", abs(near - bm), 1e-2, t0))
    return out


# 11 -------------------------------------------------------------------------------


def check_inversion(quick: bool = False) -> list[CheckResult]:
    suite = ((lambda s: 1 / s, lambda t: 1.0), (lambda s: 1 / s ** 2, lambda t: t),
             (lambda s: 1 / (s + 1), lambda t: math.exp(-t)),
             (lambda s: 1 / (s ** 2 + 1), math.sin))
    t0 = time.perf_counter()
    worst = 0.0
    for F, f in suite:
        for t in (0.5, 1.0, 2.0, 3.0):
            worst = max(worst, abs(invert(F, t).value - f(t)))
    out = [_result(11, "one-dimensional inversion suite", worst, 1e-8, t0)]
    suite2 = ((lambda th, q: 1 / ((th + 1) * (q + 2)), lambda u, t: math.exp(-u - 2 * t)),
              (lambda th, q: 1 / (th ** 2 * q), lambda u, t: u),
              (lambda th, q: 1 / ((th ** 2 + 1) * (q + 0.5)), lambda u, t: math.sin(u) * math.exp(-0.5 * t)))
    t0 = time.perf_counter()
    worst = 0.0
    for F, f in suite2:
        for u, t in ((0.5, 1.0), (1.0, 2.0), (2.0, 0.5)):
            worst = max(worst, abs(invert_2d(F, u, t).value - f(u, t)))
    out.append(_result(11, "two-dimensional separable inversion suite", worst, 1e-6, t0))
    return out


# 12 -------------------------------------------------------------------------------


def check_mc_integrity(quick: bool = False) -> list[CheckResult]:
    out = []
    for name, spec in (("brownian_drift", FAMILIES["brownian_drift"]), ("jump_diffusion_exp", JD),
                       ("stable_neg", FAMILIES["stable_neg"])):
        t0 = time.perf_counter()
        gap = mc.drawdown_drawup_identity_gap(spec, 1e-2, 500, 200, seed=SEED)
        out.append(_result(12, f"Y + hat_Y = max(sup Y, sup hat_Y) on paths, {name}", gap, 1e-9, t0))
    if quick:
        return out
    for name, spec, cfg, a, b, functionals in _halving_cases():
        t0 = time.perf_counter()
        fine, coarse = mc.simulate(spec, cfg, a, b, coupled=True)
        worst = 0.0
        for f in functionals:
            worst = max(worst, mc.dt_halving_shift(f, fine, coarse)[2])
        out.append(_result(12, f"step halving shift, {name} ({cfg.n_paths} paths)", worst, 1.0, t0,
                           "largest shift in SE units"))
    return out


def _halving_cases():
    n = 100_000
    sym = (lambda p: p.tau_a < p.hat_tau_b,)
    sup = tuple((lambda z: (lambda p: p.X_bar <= z))(z) for z in (0.5, 1.0, 2.0, 4.0))
    atoms = (lambda p: p.hatY_at_tau == 0.0, lambda p: p.Y_at_hat_tau == 0.0)
    stable = tuple((lambda z: (lambda p: p.X_bar_hat <= z))(z) for z in (0.05, 0.25, 0.5, 0.75, 0.95))
    jd = (lambda p: p.creep_flag > 0, lambda p: p.hatY_at_tau == 0.0)
    return (
        ("driftless BM symmetry", ProcessSpec.brownian(0.0, 1.0), mc.SimConfig(dt=1e-2, n_paths=n, seed=SEED),
         0.5, 0.5, sym),
        ("BM sup at tau_a", ProcessSpec.brownian(1.0, 2.0), mc.SimConfig(dt=1e-2, n_paths=n, seed=SEED), 1.0,
         None, sup),
        ("BM atoms", ProcessSpec.brownian(0.3, 1.0), mc.SimConfig(dt=1e-2, n_paths=n, seed=SEED), 1.0, 1.0,
         atoms),
        ("jump diffusion creep and atom", JD, mc.SimConfig(dt=1e-3, n_paths=n, seed=SEED), 1.0, None, jd),
        ("stable sup at hat_tau_a", FAMILIES["stable_neg"], mc.SimConfig(n_paths=n, seed=SEED), None, 1.0,
         stable),
    )


# suite ---------------------------------------------------------------------------


CRITERIA: dict[int, Callable[[bool], list[CheckResult]]] = {
    1: check_laplace_identity,
    2: check_backend_agreement,
    3: check_driftless_symmetry,
    4: check_stable_marginals,
    5: check_exponential_supremum,
    6: check_normalization,
    7: check_mass_decomposition,
    8: check_quadruple_reductions,
    9: check_atoms,
    10: check_carr_wu,
    11: check_inversion,
    12: check_mc_integrity,
}


def run_suite(quick: bool = False, criteria=None, report: Callable[[str], None] | None = print):
    results = []
    for k in (criteria or sorted(CRITERIA)):
        for r in CRITERIA[k](quick):
            results.append(r)
            if report is not None:
                report(r.line())
    return results


def suite_passed(results) -> bool:
    return all(r.passed for r in results if not r.expected_failure)


@contextlib.contextmanager
def perturbed_scale_function(factor: float = 1.0 + 1e-4):
    """Scale W by a constant factor for the duration (harness self-test)."""
    original = ScaleEngine.W

    def W(self, q, x):
        return factor * original(self, q, x)

    ScaleEngine.W = W
    try:
        yield
    finally:
        ScaleEngine.W = original
