import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sndrawdown.laplace_inversion import InversionConfig, InversionError, Method, invert, invert_2d
from sndrawdown.process_models import ProcessSpec
from sndrawdown.scale_functions import ScaleEngine

CONFIGS = [InversionConfig(), InversionConfig(method=Method.FIXED_TALBOT)]


@pytest.mark.parametrize("cfg", CONFIGS, ids=["euler", "talbot"])
@pytest.mark.parametrize("F, t, expected", [
    (lambda s: 1 / s, 3.0, 1.0),
    (lambda s: 1 / (s + 1), 1.0, math.exp(-1)),
    (lambda s: 1 / s ** 2, 2.5, 2.5),
])
def test_trivial_transforms(cfg, F, t, expected):
    res = invert(F, t, cfg)
    assert res.value == pytest.approx(expected, abs=1e-8)
    assert res.evaluations > 0


@pytest.mark.parametrize("F, u, t, expected", [
    (lambda th, q: 1 / (th * q), 1.0, 1.0, 1.0),
    (lambda th, q: 1 / (th * (q + 1)), 2.0, 1.0, math.exp(-1)),
])
def test_two_dimensional_separable(F, u, t, expected):
    assert invert_2d(F, u, t).value == pytest.approx(expected, abs=1e-7)


def test_config_validation():
    with pytest.raises(ValueError):
        InversionConfig(terms=12)
    with pytest.raises(ValueError):
        InversionConfig(terms=9)
    with pytest.raises(ValueError):
        InversionConfig(precision_decimals=15)
    with pytest.raises(ValueError):
        invert(lambda s: 1 / s, 0.0)


def test_non_finite_transform_raises():
    with pytest.raises(InversionError):
        invert(lambda s: np.full(s.shape, np.nan), 1.0)


def test_bit_reproducible():
    F = lambda s: 1 / (s ** 1.5 + 0.3)
    assert invert(F, 0.7).value == invert(F, 0.7).value


def test_inverting_resolvent_gives_brownian_scale_function():
    spec = ProcessSpec.brownian(0.4, 1.3)
    q = 0.5
    eng = ScaleEngine(spec)
    for x in np.linspace(0.1, 5, 12):
        # contour just right of the pole at phi(q)
        got = invert(lambda th: 1 / (spec.psi(th) - q), x, shift=spec.phi(q) + 1 / x).value
        assert got == pytest.approx(float(eng.W(q, x)), rel=1e-8)


def test_error_estimate_is_conservative():
    cases = []
    for a in (0.0, 0.3, 1.0, 2.5):
        for n in (1, 2, 3):
            for t in (0.2, 1.0, 3.0, 7.0):
                F = lambda s, a=a, n=n: 1 / (s + a) ** n
                exact = t ** (n - 1) * math.exp(-a * t) / math.factorial(n - 1)
                cases.append((F, t, exact))
    for cfg in CONFIGS:
        covered = sum(abs((r := invert(F, t, cfg)).value - exact) <= r.error for F, t, exact in cases)
        assert covered >= 0.95 * len(cases)


@given(st.floats(0.0, 3.0), st.floats(0.1, 8.0))
def test_exponential_decay(a, t):
    assert invert(lambda s: 1 / (s + a), t).value == pytest.approx(math.exp(-a * t), abs=1e-8)


def test_two_dimensional_drawup_law_against_simulation():
    from sndrawdown.risk_analytics import rally_first_transform
    # driftless BM, b=1: P[Y(hat_tau_b) <= 0.5, hat_tau_b < 1] over 1e6 simulated paths
    mean, se = 0.582343, 0.0004931732693190838
    eng = ScaleEngine(ProcessSpec.brownian(0.0, 1.0))
    got = invert_2d(lambda th, q: rally_first_transform(eng, 1.0, th, q), 0.5, 1.0, shift_theta=1.0).value
    assert abs(got - mean) <= 3 * se
