"""Independent reference values frozen into the unit tests.

Run with ``python3 tests/oracles/compute_oracles.py [name ...]``; prints
one JSON line per oracle. Nothing here calls the scale-function code: the
values come from brute-force series, quadrature, or simulation.
"""
import json
import math
import sys
import time
from fractions import Fraction

import mpmath as mp
import numpy as np
from scipy.integrate import quad

from sndrawdown import mc_oracle as mc
from sndrawdown.process_models import ProcessSpec

ORACLES = {}


def oracle(f):
    ORACLES[f.__name__] = f
    return f


# special functions ------------------------------------------------------------


def _stable_c(alpha):
    # e^{-y} - 1 + y = y^2 1F1(1; 3; -y) / 2 avoids cancellation near 0
    def integrand(y):
        return mp.hyp1f1(1, 3, -y) / 2 * y ** (1 - alpha)
    return 1 / mp.quad(integrand, [0, 1, mp.inf])


@oracle
def stable_levy_constant():
    # psi(theta) = int_0^inf (e^{-theta y} - 1 + theta y) c y^{-1-alpha} dy must equal theta^alpha
    alpha = 1.5
    return {"alpha": alpha, "c": float(_stable_c(alpha))}


@oracle
def stable_levy_tail():
    alpha = 1.5
    c = _stable_c(alpha)
    return {"z": -2.0, "tail": float(mp.quad(lambda y: c * y ** (-1 - alpha), [2, mp.inf]))}


@oracle
def ml_prime_fd():
    def E(y):
        return mp.nsum(lambda n: y ** n / mp.gamma(0.5 * n + 1), [0, mp.inf])
    h = mp.mpf("1e-6")
    return {"beta": 0.5, "gamma": 1.0, "y": -0.3, "value": float((E(-0.3 + h) - E(-0.3 - h)) / (2 * h))}


@oracle
def two_index_brute():
    beta = gamma = delta = 1
    y, z = Fraction(1, 5), Fraction(3, 10)
    mp.mp.dps = 40
    total = mp.mpf(1) / mp.gamma(gamma)  # (n, k) = (0, 0)
    for n in range(1, 200):
        for k in range(0, n):
            s = math.comb(n - 1, k)
            term = Fraction(s) * z ** k * y ** n
            total += mp.mpf(term.numerator) / term.denominator / mp.gamma(n * beta + k * delta + gamma)
    mp.mp.dps = 15
    return {"y": 0.2, "z": 0.3, "value": float(total)}


@oracle
def incomplete_gamma_quad():
    val, _ = quad(lambda s: math.exp(-s) * s ** 1.5, 1.7, math.inf, epsabs=0, epsrel=1e-13)
    return {"s": 2.5, "x": 1.7, "value": val}


# scale functions by quadrature of the Laplace inverse or direct integration ---------


@oracle
def carr_wu_w_bromwich():
    # W(x) = (1/2 pi i) int e^{theta x} / (psi(theta) - q) dtheta via mpmath Talbot
    out = {}
    mu, sigma, alpha = 0.1, 0.3, 1.5
    for q in (0.0, 0.2):
        f = lambda th: 1 / (mu * th + (sigma * th) ** alpha - q)
        out[f"q={q}"] = float(mp.invertlaplace(f, 1.0, method="talbot"))
    return out


@oracle
def stable_w_q03_bromwich():
    f = lambda th: 1 / (th ** 1.5 - 0.3)
    return {"x": 1.0, "value": float(mp.invertlaplace(f, 1.0, method="talbot"))}


# simulations ------------------------------------------------------------------


def _est(vals):
    vals = np.asarray(vals, dtype=float)
    return {"mean": float(vals.mean()), "se": float(vals.std(ddof=1) / math.sqrt(vals.size)), "n": int(vals.size)}


@oracle
def jd_two_sided_exit():
    """JD(mu=.5, s2=1, lam=1, eta=2) from 0.5 in [0, 1]: E[e^{-.3 T}; exit below], creeping share at q=0.

    Plain numpy Euler scheme with Brownian-bridge crossing of the lower
    level and exact exponential jumps (one per step at most, dt small).
    """
    rng = np.random.default_rng(7)
    mu, s2, lam, eta, dt, n = 0.5, 1.0, 1.0, 2.0, 2e-4, 200_000
    x = np.full(n, 0.5)
    t = np.zeros(n)
    alive = np.ones(n, bool)
    down = np.zeros(n, bool)
    creep = np.zeros(n, bool)
    sd = math.sqrt(s2 * dt)
    while alive.any():
        idx = np.flatnonzero(alive)
        x0 = x[idx]
        x1 = x0 + mu * dt + sd * rng.standard_normal(idx.size)
        # bridge crossing of 0 and 1 by the Gaussian part
        p_low = np.where(x1 > 0, np.exp(-2 * x0 * np.maximum(x1, 0) / (s2 * dt)), 1.0)
        p_up = np.where(x1 < 1, np.exp(-2 * (1 - x0) * np.maximum(1 - x1, 0) / (s2 * dt)), 1.0)
        u = rng.random(idx.size)
        hit_low = u < p_low
        hit_up = ~hit_low & (rng.random(idx.size) < p_up)
        jump = rng.random(idx.size) < lam * dt
        x1 = np.where(jump, x1 - rng.exponential(1 / eta, idx.size), x1)
        t[idx] += dt
        c = hit_low
        j = ~hit_low & ~hit_up & jump & (x1 < 0)
        up = hit_up & ~c
        done = c | j | up
        down[idx[c | j]] = True
        creep[idx[c]] = True
        x[idx] = x1
        alive[idx[done]] = False
    return {"exit_down_q0.3": _est(np.where(down, np.exp(-0.3 * t), 0.0)),
            "exit_down_q0": _est(down), "creep_down_q0": _est(creep)}


@oracle
def stable_taua_laplace():
    spec = ProcessSpec.stable(1.5, 1.0)
    p = mc.simulate(spec, mc.SimConfig(n_paths=400_000, seed=11), a=1.0)
    return {"E[exp(-0.2 tau_1)]": _est(np.exp(-0.2 * p.tau_a))}


@oracle
def stable_m_factor():
    # E[exp(-lambda (Y(tau_a) - a))] with lambda(1, 0) = alpha - 1 = 0.5
    spec = ProcessSpec.stable(1.5, 1.0)
    p = mc.simulate(spec, mc.SimConfig(n_paths=400_000, seed=12), a=1.0)
    return {"M_0": _est(np.exp(-0.5 * p.overshoot))}


@oracle
def jd_tau_functionals():
    spec = ProcessSpec.jump_diffusion(0.2, 1.0, 1.0, 2.0)
    p = mc.simulate(spec, mc.SimConfig(dt=1e-3, n_paths=1_000_000, seed=13), a=1.0)
    box = ((p.X_bar >= 0.3) & (p.X_bar < 0.7) & (p.Y_pre >= 0.4) & (p.Y_pre < 0.8)
           & (p.overshoot >= 0.1) & (p.overshoot < 0.5) & (p.creep_flag == 0))
    return {"creep_fraction": _est(p.creep_flag > 0),
            "E[exp(-0.2 tau); hatY > 0.5]": _est(np.where(p.hatY_at_tau > 0.5, np.exp(-0.2 * p.tau_a), 0.0)),
            "box v[.3,.7] y[.4,.8] h[.1,.5]": _est(box),
            "P[tau<1, new min]": _est((p.tau_a < 1.0) & (p.hatY_at_tau == 0.0))}


@oracle
def bm_hat_tau_functionals():
    p = mc.simulate(ProcessSpec.brownian(0.0, 1.0), mc.SimConfig(dt=1e-3, n_paths=1_000_000, seed=14), b=1.0)
    joint = np.exp(-0.3 * p.hat_tau_b - p.Y_at_hat_tau)
    cdf = (p.Y_at_hat_tau <= 0.5) & (p.hat_tau_b < 1.0)
    p2 = mc.simulate(ProcessSpec.brownian(0.3, 1.0), mc.SimConfig(dt=1e-3, n_paths=1_000_000, seed=15), b=1.0)
    new_max = np.where(p2.Y_at_hat_tau == 0.0, np.exp(-0.5 * p2.hat_tau_b), 0.0) / 0.5
    return {"E[exp(-.3 hat_tau - Y)]": _est(joint), "P[Y(hat_tau) <= .5, hat_tau < 1]": _est(cdf),
            "new max transform q=.5 (mu=.3)": _est(new_max)}


@oracle
def risk_values():
    out = {}
    bm = ProcessSpec.brownian(0.3, 1.0)
    p = mc.simulate(bm, mc.SimConfig(dt=1e-3, n_paths=1_000_000, seed=16, t_max=1.0), b=math.log(1.25))
    out["bm new max beta=.25 T=1"] = _est((p.hat_tau_b < 1) & (p.Y_at_hat_tau == 0.0))
    bm = ProcessSpec.brownian(0.05, 0.04)
    a = -math.log(0.9)
    p = mc.simulate(bm, mc.SimConfig(dt=1e-3, n_paths=1_000_000, seed=17, t_max=1.0), a=a)
    with np.errstate(invalid="ignore"):
        gap = np.where(p.tau_a < 1, 100 * (np.exp(p.X_bar) - np.exp(p.X_at_tau)), 0.0)
    out["bm expected dd S0=100 alpha=.1 T=1"] = _est(gap)
    cw = ProcessSpec.stable_drift(0.1, 0.3, 1.5)
    p = mc.simulate(cw, mc.SimConfig(n_paths=400_000, seed=18), a=-math.log(0.7), b=math.log(1.1))
    out["carr-wu crash alpha=.3 beta=.1"] = _est(p.tau_a < p.hat_tau_b)
    out["carr-wu crash unfinished"] = int(np.sum(~np.isfinite(np.minimum(p.tau_a, p.hat_tau_b))))
    return out


if __name__ == "__main__":
    names = sys.argv[1:] or list(ORACLES)
    for name in names:
        t0 = time.perf_counter()
        res = ORACLES[name]()
        print(json.dumps({"oracle": name, "seconds": round(time.perf_counter() - t0, 1), **res}), flush=True)
