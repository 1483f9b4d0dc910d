"""Parametric spectrally negative Levy models.

Each model is described by its Laplace exponent psi(theta) = log E[exp(theta X_1)],
finite for Re(theta) >= 0. The four supported families are

    brownian_drift       psi = mu*theta + sigma2*theta**2/2
    stable_neg           psi = (sigma*theta)**alpha,               1 < alpha <= 2
    stable_drift         psi = mu*theta + (sigma*theta)**alpha,    1 < alpha < 2
    jump_diffusion_exp   psi = mu*theta + sigma2*theta**2/2 + lam*(eta/(eta+theta) - 1)

All exponents accept real or complex arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from enum import Enum
from typing import Any

import numpy as np
from scipy.special import gamma as gamma_fn


class Family(str, Enum):
    BROWNIAN_DRIFT = "brownian_drift"
    STABLE_NEG = "stable_neg"
    STABLE_DRIFT = "stable_drift"
    JUMP_DIFFUSION_EXP = "jump_diffusion_exp"


class ModelError(ValueError):
    """Raised for parameters outside a family's admissible range."""


class UnsupportedFamilyError(ModelError):
    """Raised when an operation has no meaning for the given family."""


_FIELDS = ("family", "mu", "sigma2", "sigma", "alpha", "lambda", "eta")


@dataclass(frozen=True)
class ProcessSpec:
    family: Family
    mu: float = 0.0
    sigma2: float = 0.0
    sigma: float = 0.0
    alpha: float = 2.0
    lam: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("mu", "sigma2", "sigma", "alpha", "lam", "eta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ModelError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        fam = self.family
        if fam is Family.BROWNIAN_DRIFT:
            if self.sigma2 <= 0:
                raise ModelError("brownian_drift needs sigma2 > 0 (otherwise the path is monotone)")
        elif fam is Family.STABLE_NEG:
            if not 1.0 < self.alpha <= 2.0:
                raise ModelError("stable_neg needs alpha in (1, 2]")
            if self.sigma <= 0:
                raise ModelError("stable_neg needs sigma > 0")
        elif fam is Family.STABLE_DRIFT:
            if not 1.0 < self.alpha < 2.0:
                raise ModelError("stable_drift needs alpha in (1, 2)")
            if self.sigma <= 0:
                raise ModelError("stable_drift needs sigma > 0")
        elif fam is Family.JUMP_DIFFUSION_EXP:
            if self.sigma2 < 0 or self.lam < 0 or self.eta <= 0:
                raise ModelError("jump_diffusion_exp needs sigma2 >= 0, lambda >= 0, eta > 0")
            if self.sigma2 == 0 and (self.lam == 0 or self.mu <= 0):
                # without Gaussian part the only upward motion is the drift
                raise ModelError("jump_diffusion_exp without Gaussian part needs lambda > 0 and mu > 0")

    # constructors -------------------------------------------------------

    @classmethod
    def brownian(cls, mu: float, sigma2: float) -> "ProcessSpec":
        return cls(Family.BROWNIAN_DRIFT, mu=mu, sigma2=sigma2)

    @classmethod
    def stable(cls, alpha: float, sigma: float = 1.0) -> "ProcessSpec":
        return cls(Family.STABLE_NEG, sigma=sigma, alpha=alpha)

    @classmethod
    def stable_drift(cls, mu: float, sigma: float, alpha: float) -> "ProcessSpec":
        return cls(Family.STABLE_DRIFT, mu=mu, sigma=sigma, alpha=alpha)

    @classmethod
    def jump_diffusion(cls, mu: float, sigma2: float, lam: float, eta: float) -> "ProcessSpec":
        return cls(Family.JUMP_DIFFUSION_EXP, mu=mu, sigma2=sigma2, lam=lam, eta=eta)

    # serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["family"] = self.family.value
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in _FIELDS}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProcessSpec":
        unknown = set(data) - set(_FIELDS)
        if unknown:
            raise ModelError(f"unknown model keys: {sorted(unknown)}")
        if "family" not in data:
            raise ModelError("model needs a 'family' key")
        kwargs = {k: v for k, v in data.items() if k != "lambda"}
        if "lambda" in data:
            kwargs["lam"] = data["lambda"]
        return cls(**kwargs)

    # structural facts ---------------------------------------------------

    @property
    def is_stable_family(self) -> bool:
        return self.family in (Family.STABLE_NEG, Family.STABLE_DRIFT) and self.alpha < 2.0

    @property
    def gaussian_coefficient(self) -> float:
        """Coefficient s2 of theta**2/2 in psi."""
        if self.family in (Family.BROWNIAN_DRIFT, Family.JUMP_DIFFUSION_EXP):
            return self.sigma2
        if self.family is Family.STABLE_NEG and self.alpha == 2.0:
            return 2.0 * self.sigma ** 2
        return 0.0

    @property
    def has_bounded_variation(self) -> bool:
        return self.family is Family.JUMP_DIFFUSION_EXP and self.sigma2 == 0.0

    @property
    def scale_at_zero(self) -> float:
        """W(0): 1/d for bounded variation paths with drift d, else 0."""
        return 1.0 / self.mu if self.has_bounded_variation else 0.0

    @property
    def creeps_downward(self) -> bool:
        return self.gaussian_coefficient > 0.0

    @property
    def mean(self) -> float:
        """psi'(0+), the mean of X_1."""
        return float(self.psi_prime(0.0))

    # exponent -----------------------------------------------------------

    def psi(self, theta):
        theta = np.asarray(theta)
        fam = self.family
        if fam is Family.BROWNIAN_DRIFT:
            return self.mu * theta + 0.5 * self.sigma2 * theta * theta
        if fam is Family.STABLE_NEG:
            return _stable_power(self.sigma * theta, self.alpha)
        if fam is Family.STABLE_DRIFT:
            return self.mu * theta + _stable_power(self.sigma * theta, self.alpha)
        return (self.mu * theta + 0.5 * self.sigma2 * theta * theta
                + self.lam * (self.eta / (self.eta + theta) - 1.0))

    def psi_prime(self, theta):
        theta = np.asarray(theta)
        fam = self.family
        if fam is Family.BROWNIAN_DRIFT:
            return self.mu + self.sigma2 * theta
        if fam in (Family.STABLE_NEG, Family.STABLE_DRIFT):
            drift = self.mu if fam is Family.STABLE_DRIFT else 0.0
            return drift + self.alpha * self.sigma ** self.alpha * _stable_power(theta, self.alpha - 1.0)
        return self.mu + self.sigma2 * theta - self.lam * self.eta / (self.eta + theta) ** 2

    def phi(self, q: float) -> float:
        """Right inverse of psi: the largest root of psi(theta) = q."""
        q = float(q)
        if q < 0 or not math.isfinite(q):
            raise ModelError("phi needs q >= 0")
        if self.family is Family.STABLE_NEG:
            return q ** (1.0 / self.alpha) / self.sigma
        slope0 = float(self.psi_prime(0.0))
        if q == 0.0 and slope0 >= 0.0:
            return 0.0
        f = lambda t: float(self.psi(t)) - q
        # Newton from the right of the root converges monotonically on a convex function
        hi = 1.0
        while f(hi) <= 0.0:
            hi *= 2.0
        lo = 0.0
        if q == 0.0:
            lo = _argmin_convex(lambda t: float(self.psi_prime(t)), hi)
        theta = hi
        for _ in range(200):
            fv = f(theta)
            dv = float(self.psi_prime(theta))
            step = fv / dv if dv > 0 else math.inf
            new = theta - step
            if not lo < new < theta:
                new = 0.5 * (lo + theta)
            if f(new) > 0:
                theta = new
            else:
                lo = new
            if abs(theta - lo) <= 1e-15 * max(1.0, theta) or abs(step) <= 4e-16 * max(1.0, theta):
                break
        return theta

    # jump measure -------------------------------------------------------

    def stable_levy_constant(self) -> float:
        """c in the density c*|z|**(-1-alpha) of the stable jump measure on z < 0."""
        return self.sigma ** self.alpha / float(gamma_fn(-self.alpha))

    def levy_density(self, z):
        """Density of the Levy measure at z < 0."""
        z = np.asarray(z, dtype=float)
        if np.any(z >= 0):
            raise ModelError("levy_density is defined for z < 0")
        if self.family is Family.JUMP_DIFFUSION_EXP:
            return self.lam * self.eta * np.exp(self.eta * z)
        if self.is_stable_family:
            return self.stable_levy_constant() * np.abs(z) ** (-1.0 - self.alpha)
        raise UnsupportedFamilyError(f"{self.family.value} has no jump part")

    def levy_tail(self, z):
        """Lambda((-inf, z)) for z < 0."""
        z = np.asarray(z, dtype=float)
        if np.any(z >= 0):
            raise ModelError("levy_tail is defined for z < 0")
        if self.family is Family.JUMP_DIFFUSION_EXP:
            return self.lam * np.exp(self.eta * z)
        if self.is_stable_family:
            return self.stable_levy_constant() * np.abs(z) ** (-self.alpha) / self.alpha
        raise UnsupportedFamilyError(f"{self.family.value} has no jump part")


def _stable_power(base, alpha):
    # principal branch; exact zero at zero
    base = np.asarray(base)
    if np.iscomplexobj(base):
        return np.where(base == 0, 0.0, np.power(base, alpha))
    with np.errstate(invalid="ignore"):
        return np.where(base > 0, np.power(np.abs(base), alpha), 0.0)


def _argmin_convex(dpsi, hi):
    # bisection for the zero of an increasing derivative on (0, hi)
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if dpsi(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * hi:
            break
    return hi
