"""Monte Carlo simulation of drawdown and drawup functionals.

Path schemes
------------
* Gaussian part (brownian_drift, jump_diffusion_exp, stable with alpha=2):
  exact Gaussian increments on a fixed grid. The maximum and minimum inside
  each step are drawn from their Brownian-bridge laws, so level crossings
  between grid points (creeping) are detected.
* Exponential jumps: compound Poisson, exact counts per step, applied at the
  end of the step.
* Stable parts, default scheme "small_jumps": jumps smaller than
  eps = jump_cutoff * min(a, b) are replaced by Brownian motion with the
  same variance, the compensator of the larger jumps becomes a drift, and
  the larger jumps (Pareto sizes) run through the compound Poisson path
  above. Crossings by the Brownian stand-in are flagged as creeping; for
  stable processes that flag marks jumps below eps, not true creeping.
* Stable parts, scheme "cms": Chambers-Mallows-Stuck increments with
  totally negative skew. The step adapts to the distance from the nearest
  relevant level (drawdown and drawup thresholds, running extrema),
  clipped to [dt_min, dt]. A downward increment is treated as a jump.
  Slow, and biased upward for running suprema (maxima inside a step are
  missed); kept as a cross-check.

Random numbers come from Philox streams, one per block of paths, spawned
from the seed; estimates are therefore reproducible bit for bit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable

import numba as nb
import numpy as np

from .process_models import Family, ProcessSpec

SCHEMA_VERSION = 1
BLOCK_SIZE = 4096

# output columns of the simulation kernel
_COLUMNS = ("tau_a", "X_bar", "X_low_pre", "X_low", "X_at_tau", "Y_pre", "overshoot", "G_bar",
            "creep_flag", "hat_tau_b", "X_bar_hat", "X_low_hat", "X_at_hat_tau", "G_low", "steps")
_NCOL = len(_COLUMNS)
(C_TAU, C_XBAR, C_XLOWPRE, C_XLOW, C_XTAU, C_YPRE, C_OVER, C_GBAR, C_CREEP,
 C_HTAU, C_XBARH, C_XLOWH, C_XH, C_GLOW, C_STEPS) = range(_NCOL)

# state vector
_X, _XBAR, _XLOW, _T, _TMAX, _TMIN, _DONE_A, _DONE_B = range(8)
C_STEPS_STATE = 8  # step counter stored after the eight state slots


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls.

    dt is the fixed step for Gaussian and compound Poisson parts and the
    largest step for stable parts, whose step is kappa * (d / sigma)**alpha
    for the distance d to the nearest relevant level or running extreme
    (extremes count with at least rho times the current range).
    level_floor and extreme_floor bound d below, relative to min(a, b);
    jump_cutoff is the small-jump cutoff relative to d. dt_min only
    applies to the "cms" scheme.
    """
    dt: float = 1e-3
    n_paths: int = 100_000
    seed: int = 20240101
    t_max: float = 1e3
    kappa: float = 0.01
    rho: float = 0.3
    dt_min: float = 1e-12
    stable_scheme: str = "small_jumps"
    jump_cutoff: float = 0.1
    move: float = 0.2
    level_floor: float = 1e-3
    extreme_floor: float = 1e-6

    def __post_init__(self):
        if self.stable_scheme not in ("small_jumps", "cms"):
            raise ValueError("stable_scheme must be 'small_jumps' or 'cms'")
        if not 0 < self.jump_cutoff < 1:
            raise ValueError("jump_cutoff must lie in (0, 1)")
        if not (0 < self.kappa and 0 < self.move and 0 < self.rho < 1 and 0 < self.extreme_floor and 0 < self.level_floor):
            raise ValueError("kappa, rho and the floors must be positive (rho < 1)")
        if not self.dt > 0 or not self.t_max > 0:
            raise ValueError("dt and t_max must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if not 0 < self.dt_min <= self.dt:
            raise ValueError("dt_min must lie in (0, dt]")

    def halved(self) -> "SimConfig":
        return replace(self, dt=self.dt / 2, kappa=self.kappa / 2, dt_min=self.dt_min / 2)


class PathFunctionals:
    """Columnar per-path functionals at tau_a and hat_tau_b.

    Times equal inf for paths truncated at t_max before the level was hit.
    """

    columns = _COLUMNS

    def __init__(self, data: np.ndarray, a: float, b: float):
        self.data = data
        self.a = a
        self.b = b

    def __len__(self):
        return self.data.shape[0]

    def __getattr__(self, name):
        if name in _COLUMNS:
            return self.data[:, _COLUMNS.index(name)]
        raise AttributeError(name)

    @property
    def hatY_at_tau(self):
        """hat_Y(tau_a) = X(tau_a) - inf X(tau_a) (NaN on truncated paths)."""
        with np.errstate(invalid="ignore"):
            return self.X_at_tau - self.X_low

    @property
    def Y_at_hat_tau(self):
        """Y(hat_tau_b) = sup X(hat_tau_b) - X(hat_tau_b) (NaN on truncated paths)."""
        with np.errstate(invalid="ignore"):
            return self.X_bar_hat - self.X_at_hat_tau

    @property
    def truncated_a(self) -> int:
        return int(np.sum(~np.isfinite(self.tau_a)))

    @property
    def truncated_b(self) -> int:
        return int(np.sum(~np.isfinite(self.hat_tau_b)))


# ------------------------------------------------------------------ kernels


@nb.njit(cache=True)
def _cms(alpha, u, e):
    """Standard stable variate with skewness -1 (Chambers-Mallows-Stuck)."""
    t = math.tan(math.pi * alpha / 2.0)
    B = math.atan(-t) / alpha
    S = (1.0 + t * t) ** (1.0 / (2.0 * alpha))
    V = (u - 0.5) * math.pi
    return (S * math.sin(alpha * (V + B)) / math.cos(V) ** (1.0 / alpha)
            * (math.cos(V - alpha * (V + B)) / e) ** ((1.0 - alpha) / alpha))


@nb.njit(cache=True)
def _continuous(S, O, dx, hi, lo, h, frac, a, b):
    """Continuous move by dx with path extremes hi, lo inside the step."""
    t_in = S[_T] + frac * h
    if S[_DONE_A] == 0.0:
        level = S[_XBAR] - a
        if lo < level:
            O[C_TAU] = t_in
            O[C_XBAR] = S[_XBAR]
            O[C_XLOWPRE] = min(S[_XLOW], level)
            O[C_XLOW] = O[C_XLOWPRE]
            O[C_XTAU] = level
            O[C_YPRE] = a
            O[C_OVER] = 0.0
            O[C_GBAR] = S[_TMAX]
            O[C_CREEP] = 1.0
            S[_DONE_A] = 1.0
    if S[_DONE_B] == 0.0:
        level = S[_XLOW] + b
        if hi > level:
            O[C_HTAU] = t_in
            O[C_XBARH] = max(S[_XBAR], level)
            O[C_XLOWH] = S[_XLOW]
            O[C_XH] = level
            O[C_GLOW] = S[_TMIN]
            S[_DONE_B] = 1.0
    if hi > S[_XBAR]:
        S[_XBAR] = hi
        S[_TMAX] = t_in
    if lo < S[_XLOW]:
        S[_XLOW] = lo
        S[_TMIN] = t_in
    S[_X] += dx
    S[_T] += h


@nb.njit(cache=True)
def _jump(S, O, size, a):
    """Downward jump of the given size at the current time."""
    x_new = S[_X] - size
    if S[_DONE_A] == 0.0 and S[_XBAR] - x_new > a:
        O[C_TAU] = S[_T]
        O[C_XBAR] = S[_XBAR]
        O[C_XLOWPRE] = S[_XLOW]
        O[C_XLOW] = min(S[_XLOW], x_new)
        O[C_XTAU] = x_new
        O[C_YPRE] = S[_XBAR] - S[_X]
        O[C_OVER] = S[_XBAR] - x_new - a
        O[C_GBAR] = S[_TMAX]
        O[C_CREEP] = 0.0
        S[_DONE_A] = 1.0
    S[_X] = x_new
    if x_new < S[_XLOW]:
        S[_XLOW] = x_new
        S[_TMIN] = S[_T]


@nb.njit(cache=True)
def _bridge_extremes(rng, x0, dx, var):
    """Max and min of a Brownian bridge from x0 to x0 + dx with variance var."""
    x1 = x0 + dx
    if var <= 0.0:
        return max(x0, x1), min(x0, x1)
    r1 = math.sqrt(dx * dx - 2.0 * var * math.log(1.0 - rng.random()))
    r2 = math.sqrt(dx * dx - 2.0 * var * math.log(1.0 - rng.random()))
    return 0.5 * (x0 + x1 + r1), 0.5 * (x0 + x1 - r2)


@nb.njit(cache=True)
def _jump_size(rng, eta, pareto_alpha):
    """Exponential(eta) sizes, or Pareto sizes eta * U**(-1/alpha) when pareto_alpha > 0."""
    if pareto_alpha > 0.0:
        return eta * (1.0 - rng.random()) ** (-1.0 / pareto_alpha)
    return rng.standard_exponential() / eta


@nb.njit(cache=True)
def _gauss_step(rng, S, O, h, mu, s2, lam, eta, pareto_alpha, a, b):
    dx = mu * h + math.sqrt(s2 * h) * rng.standard_normal()
    hi, lo = _bridge_extremes(rng, S[_X], dx, s2 * h)
    _continuous(S, O, dx, hi, lo, h, 0.5, a, b)
    if lam > 0.0:
        n = rng.poisson(lam * h)
        for _ in range(n):
            _jump(S, O, _jump_size(rng, eta, pareto_alpha), a)
    S[C_STEPS_STATE] += 1.0


@nb.njit(cache=True)
def _stable_move(S, O, dx, h, a, b):
    if dx >= 0.0:
        _continuous(S, O, dx, S[_X] + dx, S[_X], h, 1.0, a, b)
    else:
        S[_T] += h
        _jump(S, O, -dx, a)
    S[C_STEPS_STATE] += 1.0


@nb.njit(cache=True)
def _stable_h(S, a, b, alpha, sigma, kappa, rho, dt_min, dt_max):
    x = S[_X]
    span = max(S[_XBAR] - S[_XLOW], 1e-12)
    d = 1e300
    if S[_DONE_A] == 0.0:
        d = min(d, a - (S[_XBAR] - x))
        d = min(d, max(x - S[_XLOW], rho * span))
    if S[_DONE_B] == 0.0:
        d = min(d, b - (x - S[_XLOW]))
        d = min(d, max(S[_XBAR] - x, rho * span))
    d = max(d, 0.0)
    h = kappa * (d / sigma) ** alpha
    return min(max(h, dt_min), dt_max)


@nb.njit(cache=True)
def _init(S, O):
    for i in range(S.shape[0]):
        S[i] = 0.0
    for i in range(O.shape[0]):
        O[i] = np.inf
    O[C_CREEP] = 0.0


@nb.njit(cache=True)
def _finish(S, O):
    O[C_STEPS] = S[C_STEPS_STATE]


@nb.njit(cache=True)
def _run_block(rng, out, out_coarse, kind, mu, s2, lam, eta, pareto_alpha, alpha, sigma, a, b,
               dt, t_max, kappa, rho, dt_min, need_a, need_b, coupled):
    """kind 0: Gaussian + compound Poisson, kind 1: stable (+ drift) by CMS steps.

    With ``coupled`` the main output uses half steps and out_coarse the
    summed full steps driven by the same increments.
    """
    S = np.zeros(9)
    Sc = np.zeros(9)
    jumps = np.empty(16)
    scale = 0.0
    if kind == 1:
        scale = sigma * abs(math.cos(math.pi * alpha / 2.0)) ** (1.0 / alpha)
    for p in range(out.shape[0]):
        O = out[p]
        Oc = out_coarse[p if coupled else 0]
        _init(S, O)
        _init(Sc, Oc)
        if not need_a:
            S[_DONE_A] = 1.0
            Sc[_DONE_A] = 1.0
        if not need_b:
            S[_DONE_B] = 1.0
            Sc[_DONE_B] = 1.0
        if not coupled:
            Sc[_DONE_A] = 1.0
            Sc[_DONE_B] = 1.0
        while True:
            fine_live = S[_DONE_A] == 0.0 or S[_DONE_B] == 0.0
            coarse_live = Sc[_DONE_A] == 0.0 or Sc[_DONE_B] == 0.0
            if not (fine_live or coarse_live) or max(S[_T], Sc[_T]) >= t_max:
                break
            if kind == 0:
                if not coupled:
                    _gauss_step(rng, S, O, dt, mu, s2, lam, eta, pareto_alpha, a, b)
                    continue
                h = 0.5 * dt
                z1 = rng.standard_normal()
                z2 = rng.standard_normal()
                dx1 = mu * h + math.sqrt(s2 * h) * z1
                dx2 = mu * h + math.sqrt(s2 * h) * z2
                n1 = rng.poisson(lam * h) if lam > 0.0 else 0
                n2 = rng.poisson(lam * h) if lam > 0.0 else 0
                x0c = Sc[_X]
                # fine path: two half steps
                hi, lo = _bridge_extremes(rng, S[_X], dx1, s2 * h)
                _continuous(S, O, dx1, hi, lo, h, 0.5, a, b)
                if n1 + n2 > jumps.shape[0]:
                    jumps = np.empty(2 * (n1 + n2))
                for k in range(n1 + n2):
                    jumps[k] = _jump_size(rng, eta, pareto_alpha)
                for k in range(n1):
                    _jump(S, O, jumps[k], a)
                hi, lo = _bridge_extremes(rng, S[_X], dx2, s2 * h)
                _continuous(S, O, dx2, hi, lo, h, 0.5, a, b)
                for k in range(n1, n1 + n2):
                    _jump(S, O, jumps[k], a)
                S[C_STEPS_STATE] += 2.0
                # coarse path: one full step with the summed increment
                hi, lo = _bridge_extremes(rng, x0c, dx1 + dx2, s2 * dt)
                _continuous(Sc, Oc, dx1 + dx2, hi, lo, dt, 0.5, a, b)
                for k in range(n1 + n2):
                    _jump(Sc, Oc, jumps[k], a)
                Sc[C_STEPS_STATE] += 1.0
            else:
                if not coupled:
                    h = _stable_h(S, a, b, alpha, sigma, kappa, rho, dt_min, dt)
                    dx = mu * h + scale * h ** (1.0 / alpha) * _cms(alpha, rng.random(), rng.standard_exponential())
                    _stable_move(S, O, dx, h, a, b)
                    continue
                h = dt
                if coarse_live:
                    h = min(h, _stable_h(Sc, a, b, alpha, sigma, kappa, rho, dt_min, dt))
                if fine_live:
                    h = min(h, 2.0 * _stable_h(S, a, b, alpha, sigma, 0.5 * kappa, rho, 0.5 * dt_min, 0.5 * dt))
                hh = 0.5 * h
                s_half = scale * hh ** (1.0 / alpha)
                dx1 = mu * hh + s_half * _cms(alpha, rng.random(), rng.standard_exponential())
                dx2 = mu * hh + s_half * _cms(alpha, rng.random(), rng.standard_exponential())
                _stable_move(S, O, dx1, hh, a, b)
                _stable_move(S, O, dx2, hh, a, b)
                # the coarse step sees the two half increments as one move
                _stable_move(Sc, Oc, dx1 + dx2, h, a, b)
        _finish(S, O)
        _finish(Sc, Oc)


@nb.njit(cache=True)
def _scale_distance(S, a, b, rho, level_floor, extreme_floor):
    """Distance to the nearest level or running extreme that the next step must resolve."""
    x = S[_X]
    span = S[_XBAR] - S[_XLOW]
    d = 1e300
    if S[_DONE_A] == 0.0:
        d = min(d, max(a - (S[_XBAR] - x), level_floor))
        d = min(d, max(x - S[_XLOW], rho * span, extreme_floor))
    if S[_DONE_B] == 0.0:
        d = min(d, max(b - (x - S[_XLOW]), level_floor))
        d = min(d, max(S[_XBAR] - x, rho * span, extreme_floor))
    return d


@nb.njit(cache=True)
def _run_block_scaled(rng, out, out_coarse, mu, alpha, c, a, b, t_max, move, cut,
                      rho, level_floor, extreme_floor, need_a, need_b, coupled):
    """Stable paths with a scale-adaptive small-jump cutoff.

    At distance d (see _scale_distance) jumps below cut * d become Brownian
    motion plus drift. Between the remaining jumps, whose times are drawn
    exactly, the path moves in bridged segments short enough that drift and
    standard deviation each stay below move * d. With ``coupled`` the fine
    path splits every segment into two bridged halves and the coarse path
    takes it whole.
    """
    S = np.zeros(9)
    Sc = np.zeros(9)
    k_var = c * cut ** (2.0 - alpha) / (2.0 - alpha)
    k_drift = c * cut ** (1.0 - alpha) / (alpha - 1.0)
    k_rate = c * cut ** (-alpha) / alpha
    for p in range(out.shape[0]):
        O = out[p]
        Oc = out_coarse[p if coupled else 0]
        _init(S, O)
        _init(Sc, Oc)
        if not need_a:
            S[_DONE_A] = 1.0
            Sc[_DONE_A] = 1.0
        if not need_b:
            S[_DONE_B] = 1.0
            Sc[_DONE_B] = 1.0
        if not coupled:
            Sc[_DONE_A] = 1.0
            Sc[_DONE_B] = 1.0
        while True:
            fine_live = S[_DONE_A] == 0.0 or S[_DONE_B] == 0.0
            coarse_live = Sc[_DONE_A] == 0.0 or Sc[_DONE_B] == 0.0
            if not (fine_live or coarse_live) or max(S[_T], Sc[_T]) >= t_max:
                break
            d = 1e300
            if fine_live:
                d = _scale_distance(S, a, b, rho, level_floor, extreme_floor)
            if coupled and coarse_live:
                d = min(d, _scale_distance(Sc, a, b, rho, level_floor, extreme_floor))
            pw = d ** (-alpha)
            var = k_var * d * d * pw
            drift = mu + k_drift * d * pw
            rate = k_rate * pw
            # segment length: |drift| * h <= move * d and var * h <= (move * d)**2
            md = move * d
            h = md * md / var
            if drift != 0.0:
                h = min(h, md / abs(drift))
            wait = rng.standard_exponential() / rate
            jump = wait <= h
            if jump:
                h = wait
            if not coupled:
                dx = drift * h + math.sqrt(var * h) * rng.standard_normal()
                hi, lo = _bridge_extremes(rng, S[_X], dx, var * h)
                _continuous(S, O, dx, hi, lo, h, 0.5, a, b)
                if jump:
                    _jump(S, O, cut * d * (1.0 - rng.random()) ** (-1.0 / alpha), a)
                S[C_STEPS_STATE] += 1.0
                continue
            hh = 0.5 * h
            dx1 = drift * hh + math.sqrt(var * hh) * rng.standard_normal()
            dx2 = drift * hh + math.sqrt(var * hh) * rng.standard_normal()
            size = cut * d * (1.0 - rng.random()) ** (-1.0 / alpha) if jump else 0.0
            x0c = Sc[_X]
            if fine_live:
                hi, lo = _bridge_extremes(rng, S[_X], dx1, var * hh)
                _continuous(S, O, dx1, hi, lo, hh, 0.5, a, b)
                hi, lo = _bridge_extremes(rng, S[_X], dx2, var * hh)
                _continuous(S, O, dx2, hi, lo, hh, 0.5, a, b)
                if jump:
                    _jump(S, O, size, a)
                S[C_STEPS_STATE] += 2.0
            if coarse_live:
                hi, lo = _bridge_extremes(rng, x0c, dx1 + dx2, var * h)
                _continuous(Sc, Oc, dx1 + dx2, hi, lo, h, 0.5, a, b)
                if jump:
                    _jump(Sc, Oc, size, a)
                Sc[C_STEPS_STATE] += 1.0
        _finish(S, O)
        _finish(Sc, Oc)


# ------------------------------------------------------------------ driver


def _kind_and_params(spec: ProcessSpec, config: "SimConfig"):
    """Kernel kind (0 Gaussian/compound Poisson, 1 CMS, 2 scaled small jumps) and drift, s2, lam, eta."""
    s2 = spec.gaussian_coefficient
    if spec.family is Family.STABLE_NEG and spec.alpha == 2.0:
        return 0, 0.0, s2, 0.0, 1.0
    if spec.family in (Family.BROWNIAN_DRIFT, Family.JUMP_DIFFUSION_EXP):
        return 0, spec.mu, s2, spec.lam, spec.eta
    mu = spec.mu if spec.family is Family.STABLE_DRIFT else 0.0
    return (1 if config.stable_scheme == "cms" else 2), mu, 0.0, 0.0, 1.0


def simulate(spec: ProcessSpec, config: SimConfig, a: float | None = None, b: float | None = None,
             coupled: bool = False):
    """Simulate n_paths paths until tau_a and hat_tau_b (either level may be None).

    Returns PathFunctionals, or a (fine, coarse) pair with ``coupled=True``:
    fine uses config.halved() step controls and coarse uses config, both
    driven by the same increments.
    """
    if a is None and b is None:
        raise ValueError("give at least one of the levels a, b")
    if (a is not None and a <= 0) or (b is not None and b <= 0):
        raise ValueError("levels must be positive")
    a_val = a if a is not None else 1.0
    b_val = b if b is not None else 1.0
    level = min(v for v in (a, b) if v is not None)
    kind, mu, s2, lam, eta = _kind_and_params(spec, config)
    n = config.n_paths
    out = np.empty((n, _NCOL))
    out_c = np.empty((n if coupled else 1, _NCOL))
    seeds = np.random.SeedSequence(config.seed).spawn((n + BLOCK_SIZE - 1) // BLOCK_SIZE)
    for k, ss in enumerate(seeds):
        rng = np.random.Generator(np.random.Philox(ss))
        sl = slice(k * BLOCK_SIZE, min(n, (k + 1) * BLOCK_SIZE))
        oc = out_c[sl] if coupled else out_c
        if kind == 2:
            _run_block_scaled(rng, out[sl], oc, mu, spec.alpha, spec.stable_levy_constant(),
                              a_val, b_val, config.t_max, config.move, config.jump_cutoff,
                              config.rho, config.level_floor * level,
                              config.extreme_floor * level, a is not None, b is not None, coupled)
        else:
            _run_block(rng, out[sl], oc, kind, mu, s2, lam, eta, 0.0, spec.alpha, spec.sigma,
                       a_val, b_val, config.dt, config.t_max, config.kappa, config.rho, config.dt_min,
                       a is not None, b is not None, coupled)
    fine = PathFunctionals(out, a_val, b_val)
    if coupled:
        return fine, PathFunctionals(out_c, a_val, b_val)
    return fine


# ------------------------------------------------------------------ estimates


@dataclass(frozen=True)
class Estimate:
    value: float
    standard_error: float
    n: int


def estimate(functional: Callable[[PathFunctionals], np.ndarray], paths: PathFunctionals) -> Estimate:
    """Mean and standard error of a per-path functional (NaN entries are errors)."""
    vals = np.asarray(functional(paths), dtype=float)
    if vals.shape != (len(paths),):
        raise ValueError("functional must return one value per path")
    if np.any(np.isnan(vals)):
        raise ValueError("functional returned NaN")
    n = vals.size
    mean = float(np.sum(vals) / n)
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return Estimate(mean, se, n)


def dt_halving_shift(functional, fine: PathFunctionals, coarse: PathFunctionals):
    """(estimate at dt/2, estimate at dt, shift / SE of the fine estimate)."""
    ef = estimate(functional, fine)
    ec = estimate(functional, coarse)
    ratio = abs(ef.value - ec.value) / ef.standard_error if ef.standard_error > 0 else 0.0
    return ef, ec, ratio


def ks_distance(samples, cdf: Callable) -> float:
    """Kolmogorov distance between the empirical law of samples and a cdf."""
    from scipy.stats import kstest
    return float(kstest(np.asarray(samples, dtype=float), cdf).statistic)


# ------------------------------------------------------------------ pathwise identity


def drawdown_drawup_identity_gap(spec: ProcessSpec, dt: float, n_steps: int, n_paths: int,
                                 seed: int = 0) -> float:
    """Largest violation of Y + hat_Y = max(sup Y, sup hat_Y) on simulated grids.

    Paths are sampled on a uniform grid (no bridge extremes) and the
    reflected processes are computed from the grid values.
    """
    rng = np.random.default_rng(seed)
    kind, mu, s2, lam, eta = _kind_and_params(spec, SimConfig(stable_scheme="cms"))
    if kind == 0:
        inc = mu * dt + math.sqrt(s2 * dt) * rng.standard_normal((n_paths, n_steps))
        if lam > 0:
            counts = rng.poisson(lam * dt, (n_paths, n_steps))
            # a sum of k exponentials is Gamma(k)
            inc -= np.where(counts > 0, rng.gamma(np.maximum(counts, 1), 1.0 / eta), 0.0)
    else:
        from scipy.stats import levy_stable
        scale = spec.sigma * abs(math.cos(math.pi * spec.alpha / 2)) ** (1 / spec.alpha) * dt ** (1 / spec.alpha)
        inc = levy_stable.rvs(spec.alpha, -1.0, loc=0.0, scale=scale, size=(n_paths, n_steps),
                              random_state=rng) + mu * dt
    X = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)], axis=1)
    Y = np.maximum.accumulate(X, axis=1) - X
    hY = X - np.minimum.accumulate(X, axis=1)
    rhs = np.maximum(np.maximum.accumulate(Y, axis=1), np.maximum.accumulate(hY, axis=1))
    return float(np.max(np.abs(Y + hY - rhs)))


# ------------------------------------------------------------------ dumps


def write_functionals_csv(path, paths: PathFunctionals) -> None:
    """Versioned CSV dump: a comment line with the schema, then one row per path."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# sndrawdown-functionals v{SCHEMA_VERSION} a={paths.a!r} b={paths.b!r}\n")
        w = csv.writer(fh)
        w.writerow(_COLUMNS)
        for row in paths.data:
            w.writerow([repr(float(v)) for v in row])


def read_functionals_csv(path) -> PathFunctionals:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) < 3 or head[1] != "sndrawdown-functionals" or head[2] != f"v{SCHEMA_VERSION}":
            raise ValueError("unknown functional dump schema")
        meta = dict(item.split("=") for item in head[3:])
        reader = csv.reader(fh)
        cols = next(reader)
        if tuple(cols) != _COLUMNS:
            raise ValueError("column mismatch in functional dump")
        data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, _NCOL)
    return PathFunctionals(data, float(meta["a"]), float(meta["b"]))
