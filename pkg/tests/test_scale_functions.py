import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from sndrawdown.process_models import ProcessSpec
from sndrawdown.special_functions import SeriesTolerance
from sndrawdown.scale_functions import (Backend, BackendError, ScaleEngine, W_carr_wu,
                                        W_conv_series, scale_table)

# Talbot inversion of 1/(psi - q) in mpmath, tests/oracles/compute_oracles.py
CW_SPEC = ProcessSpec.stable_drift(0.1, 0.3, 1.5)
CW_W_Q0_X1 = 4.360089890324024
CW_W_Q02_X1 = 6.695701980193376
STABLE_W_Q03_X1 = 1.2863460138053058

BM0 = ProcessSpec.brownian(0.0, 1.0)
BM1 = ProcessSpec.brownian(1.0, 2.0)
STABLE = ProcessSpec.stable(1.5, 1.0)


def test_w_examples():
    assert ScaleEngine(BM1).W(0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert ScaleEngine(STABLE).W(0, 4.0) == pytest.approx(2 / gamma(1.5), rel=1e-14)
    assert ScaleEngine(BM0).W(0.5, 1.0) == pytest.approx(2 * math.sinh(1), rel=1e-13)


def test_carr_wu_series_against_bromwich_oracle():
    assert W_carr_wu(CW_SPEC, 0.0, 0.0) == 0.0
    assert W_carr_wu(CW_SPEC, 0.0, 1.0) == pytest.approx(CW_W_Q0_X1, rel=1e-10)
    assert W_carr_wu(CW_SPEC, 0.2, 1.0) == pytest.approx(CW_W_Q02_X1, rel=1e-10)
    for backend in ("inversion", "convolution"):
        assert ScaleEngine(CW_SPEC, backend).W(0.2, 1.0) == pytest.approx(CW_W_Q02_X1, rel=1e-5)
    assert ScaleEngine(CW_SPEC, "inversion").W(0, 1.0) == pytest.approx(CW_W_Q0_X1, rel=1e-6)


def test_carr_wu_needs_stable_drift():
    with pytest.raises(BackendError):
        W_carr_wu(STABLE, 0.0, 1.0)
    with pytest.raises(BackendError):
        ScaleEngine(BM0, Backend.ML_SERIES)


def test_convolution_series():
    assert W_conv_series(STABLE, 0.0, 1.3) == pytest.approx(float(ScaleEngine(STABLE).W(0, 1.3)), rel=1e-10)
    assert W_conv_series(BM0, 0.5, 1.0, grid_step=1e-3) == pytest.approx(2 * math.sinh(1), rel=1e-4)
    assert W_conv_series(STABLE, 0.3, 1.0, grid_step=1e-3) == pytest.approx(STABLE_W_Q03_X1, rel=1e-4)
    assert ScaleEngine(STABLE, "inversion").W(0.3, 1.0) == pytest.approx(STABLE_W_Q03_X1, rel=1e-7)


def test_derivative_examples():
    assert ScaleEngine(BM0).W_prime(0, 1.7) == pytest.approx(2.0)
    assert ScaleEngine(STABLE).W_prime(0, 4.0) == pytest.approx(0.5 * 4 ** -0.5 / gamma(1.5), rel=1e-13)
    assert ScaleEngine(BM0).W_prime(0.5, 1.0) == pytest.approx(2 * math.cosh(1), rel=1e-13)
    assert ScaleEngine(BM0).W_prime(0.5, 1.0, side="left") == pytest.approx(2 * math.cosh(1), rel=1e-13)
    with pytest.raises(ValueError):
        ScaleEngine(BM0).W_prime(0, -1.0)
    with pytest.raises(ValueError):
        ScaleEngine(BM0).W_prime(0, 0.0, side="left")


def test_second_derivative():
    assert ScaleEngine(BM0).W_second(0, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert ScaleEngine(BM1).W_second(0, 1.0) == pytest.approx(-math.exp(-1), rel=1e-13)
    with pytest.raises(BackendError):
        ScaleEngine(STABLE).W_second(0, 1.0)


def test_z_and_integral_examples():
    eng = ScaleEngine(BM0)
    assert eng.Z(0.5, 0.0) == 1.0
    assert eng.Z(0.0, 3.0) == 1.0
    assert eng.Z(0.5, 1.0) == pytest.approx(math.cosh(1), rel=1e-13)
    assert eng.W_int(0, 2.0) == pytest.approx(4.0)
    assert ScaleEngine(STABLE).W_int(0, 1.0) == pytest.approx(1 / (1.5 * gamma(1.5)), rel=1e-13)
    cw = ScaleEngine(CW_SPEC)
    direct, _ = quad(lambda z: float(cw.W(0, z)), 0, 1, epsabs=1e-13, epsrel=1e-13)
    assert cw.W_int(0, 1.0) == pytest.approx(direct, rel=1e-8)


def test_lambda_ratio_examples():
    assert ScaleEngine(BM0).lambda_ratio(0, 2.0) == pytest.approx(0.5)
    assert ScaleEngine(STABLE).lambda_ratio(0, 1.7) == pytest.approx(0.5 / 1.7, rel=1e-13)
    assert ScaleEngine(BM1).lambda_ratio(0, 1.0) == pytest.approx(math.exp(-1) / (1 - math.exp(-1)), rel=1e-13)


def test_tilted_examples():
    eng = ScaleEngine(BM0)
    assert eng.W_tilted(0.0, 0.5, 1.3) == pytest.approx(float(eng.W(0.5, 1.3)))
    assert eng.Z_tilted(0.0, 0.5, 1.3) == pytest.approx(float(eng.Z(0.5, 1.3)))
    assert eng.Z_tilted(1.0, 0.2, 0.0) == 1.0
    assert eng.W_tilted(1.0, 0.0, 1.0) == pytest.approx(math.exp(-1) * 2 * math.sinh(1), rel=1e-13)
    st_eng = ScaleEngine(STABLE)
    # Z_u^{(p)}(x) = 1 + p int_0^x e^{-u z} W^{(p + psi(u))}(z) dz by quadrature
    u, p, x = 0.7, 0.3, 1.2
    direct, _ = quad(lambda z: math.exp(-u * z) * float(st_eng.W(p + 0.7 ** 1.5, z)), 0, x, epsrel=1e-12)
    assert st_eng.Z_tilted(u, p, x) == pytest.approx(1 + p * direct, rel=1e-9)


@pytest.mark.parametrize("spec", [BM1, STABLE, CW_SPEC, ProcessSpec.jump_diffusion(0.2, 1.0, 1.0, 2.0)],
                         ids=["bm", "stable", "stable_drift", "jd"])
def test_boundary_values(spec):
    eng = ScaleEngine(spec)
    assert eng.W(0.3, -0.5) == 0.0
    assert eng.W(0.3, 0.0) == 0.0
    assert eng.Z(0.3, -1.0) == 1.0


def test_bounded_variation_jump_diffusion_starts_positive():
    spec = ProcessSpec.jump_diffusion(1.0, 0.0, 1.0, 2.0)
    eng = ScaleEngine(spec)
    assert eng.W(0.0, 0.0) == pytest.approx(1.0)
    # W(x) = (1 - (lam/(mu eta)) e^{-(eta - lam/mu) x}) / (mu - lam/eta)
    x = 0.8
    assert eng.W(0.0, x) == pytest.approx((1 - 0.5 * math.exp(-1.0 * x)) / 0.5, rel=1e-12)


def test_laplace_identity_for_stable_drift():
    eng = ScaleEngine(CW_SPEC, tolerance=SeriesTolerance(budget=1e4))
    for q in (0.0, 0.5):
        # tail beyond z = 10 is below e^{-40} relative
        theta = CW_SPEC.phi(q) + 4.0
        val, _ = quad(lambda z: math.exp(-theta * z) * float(eng.W(q, z)), 0, 10, limit=400)
        assert val == pytest.approx(1 / (float(CW_SPEC.psi(theta)) - q), rel=1e-6)


def test_table_rows_are_ordered():
    rows = scale_table(ScaleEngine(BM0), [0.5, 1.0], [0.0, 0.5])
    assert [(r[0], r[1]) for r in rows] == [(0.5, 0.0), (1.0, 0.0), (0.5, 0.5), (1.0, 0.5)]
    assert rows[3][2:] == pytest.approx((2 * math.sinh(1), 2 * math.cosh(1), math.cosh(1)))


def test_cache_is_transparent():
    a = ScaleEngine(STABLE, cache=True)
    b = ScaleEngine(STABLE, cache=False)
    xs = np.linspace(0.1, 2, 5)
    assert np.array_equal(a.W(0.3, xs), b.W(0.3, xs))
    assert np.array_equal(a.W(0.3, xs), a.W(0.3, xs))


def test_alpha_near_two_matches_brownian():
    # (sigma theta)^alpha at alpha=2 is sigma^2 theta^2 = (2 sigma^2) theta^2 / 2
    mu, sigma = 0.1, 0.3
    near = ScaleEngine(ProcessSpec.stable_drift(mu, sigma, 1.999))
    bm = ScaleEngine(ProcessSpec.brownian(mu, 2 * sigma ** 2))
    xs = np.linspace(0.2, 3, 8)
    assert np.allclose(near.W(0, xs), bm.W(0, xs), rtol=1e-2)


def test_small_drift_matches_driftless():
    tiny = ScaleEngine(ProcessSpec.stable_drift(1e-6, 1.0, 1.5))
    plain = ScaleEngine(ProcessSpec.stable(1.5, 1.0))
    xs = np.linspace(0.1, 3, 8)
    assert np.allclose(tiny.W(0, xs), plain.W(0, xs), rtol=1e-4)


@given(st.sampled_from(["bm", "stable", "stable_drift", "jd"]), st.floats(0.0, 2.0),
       st.floats(0.0, 4.0), st.floats(0.0, 4.0))
def test_w_nondecreasing(name, q, x1, x2):
    spec = {"bm": BM1, "stable": STABLE, "stable_drift": CW_SPEC,
            "jd": ProcessSpec.jump_diffusion(0.2, 1.0, 1.0, 2.0)}[name]
    eng = ScaleEngine(spec, cache=False)
    lo, hi = sorted((x1, x2))
    assert float(eng.W(q, lo)) <= float(eng.W(q, hi)) * (1 + 1e-12) + 1e-15


@given(st.floats(0.05, 3.0), st.floats(0.0, 2.0))
def test_backends_agree_on_stable_drift(x, q):
    ref = float(ScaleEngine(CW_SPEC).W(q, x))
    assert float(ScaleEngine(CW_SPEC, "inversion").W(q, x)) == pytest.approx(ref, rel=1e-5)
