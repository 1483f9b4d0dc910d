import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sndrawdown.drawdown_laws import Y_at_hat_tau_atom
from sndrawdown.process_models import ProcessSpec
from sndrawdown.risk_analytics import (PriceModel, RiskQuery, RiskReport, carr_wu_crash_prob,
                                       carr_wu_symmetric, drawdown_before_rally, expected_drawdown_at_D,
                                       expected_drawdown_transform, expected_drawdown_transform_via_overshoot,
                                       prob_drawdown_before, prob_new_max_at_drawup, prob_new_min_at_drawdown,
                                       write_reports_csv)
from sndrawdown.scale_functions import ScaleEngine

# Simulation oracles from tests/oracles/compute_oracles.py as (mean, standard error).
BM_NEW_MAX = (0.52195, 0.000499518214901566)          # BM(0.3, 1), beta=0.25, T=1, 1e6 paths
BM_EXPECTED_DD = (10.98700492978329, 0.0020973707897976412)   # BM(0.05, 0.04), S0=100, alpha=0.1, T=1
CW_CRASH = (0.0448, 0.0003270820500374005)            # Carr-Wu (0.1, 0.3, 1.5), alpha=0.3, beta=0.1
JD_NEW_MIN = (0.55811, 0.0004966119959520457)         # JD(0.2, 1, 1, 2), a=1, T=1

CW = PriceModel(ProcessSpec.stable_drift(0.1, 0.3, 1.5))
JD = PriceModel(ProcessSpec.jump_diffusion(0.2, 1.0, 1.0, 2.0))
BM0 = PriceModel(ProcessSpec.brownian(0.0, 1.0))


def within_se(value, oracle, k=3.0):
    mean, se = oracle
    return abs(value - mean) <= k * se


def bm_symmetric(mu, s2, a):
    c = a * mu / s2
    return (math.exp(-2 * c) - 1 + 2 * c) / (math.exp(c) - math.exp(-c)) ** 2


def test_level_mapping():
    q = RiskQuery(alpha=0.2, beta=0.3)
    assert math.exp(q.a) == pytest.approx(1 / 0.8, rel=1e-15)
    assert math.exp(q.b) == pytest.approx(1.3, rel=1e-15)
    with pytest.raises(ValueError):
        RiskQuery(alpha=1.0)
    with pytest.raises(ValueError):
        RiskQuery(beta=0.0)
    with pytest.raises(ValueError):
        RiskQuery(alpha=0.1, horizon=0.0)
    with pytest.raises(ValueError):
        RiskQuery(beta=0.1).a


def test_new_extreme_examples():
    assert prob_new_min_at_drawdown(BM0, RiskQuery(alpha=0.3)).value == pytest.approx(0.5)
    assert prob_new_max_at_drawup(BM0, RiskQuery(beta=0.3)).value == pytest.approx(0.5)
    tiny = prob_new_max_at_drawup(BM0, RiskQuery(beta=0.3, horizon=1e-3), fallback_paths=2000)
    assert tiny.value < 1e-3
    rep = prob_new_max_at_drawup(PriceModel(ProcessSpec.brownian(0.3, 1.0)), RiskQuery(beta=0.25, horizon=1.0))
    assert rep.method == "laplace_inversion"
    assert within_se(rep.value, BM_NEW_MAX)
    assert within_se(prob_new_min_at_drawdown(JD, RiskQuery(alpha=1 - math.exp(-1), horizon=1.0)).value,
                     JD_NEW_MIN)


def test_expected_drawdown():
    model = PriceModel(ProcessSpec.brownian(0.05, 0.04), 100.0)
    rep = expected_drawdown_at_D(model, RiskQuery(alpha=0.1, horizon=1.0))
    assert within_se(rep.value, BM_EXPECTED_DD)
    small = expected_drawdown_at_D(model, RiskQuery(alpha=1e-4, horizon=1.0))
    assert small.value < 0.02
    # Brownian paths end exactly at the drawdown level: sup S - S = S_bar alpha
    eng = ScaleEngine(model.spec)
    a = RiskQuery(alpha=0.1).a
    for q in (0.5, 2.0):
        assert expected_drawdown_transform(eng, 100.0, a, q) == pytest.approx(
            expected_drawdown_transform_via_overshoot(eng, 100.0, a, q), rel=1e-12)


def test_expected_drawdown_transform_forms_agree_with_jumps():
    eng = ScaleEngine(JD.spec)
    for q in (1.5, 3.0):
        assert expected_drawdown_transform(eng, 1.0, 0.5, q) == pytest.approx(
            expected_drawdown_transform_via_overshoot(eng, 1.0, 0.5, q), rel=1e-10)


def test_expected_drawdown_nondecreasing_in_horizon():
    model = PriceModel(ProcessSpec.brownian(0.05, 0.04), 100.0)
    vals = [expected_drawdown_at_D(model, RiskQuery(alpha=0.1, horizon=T)).value for T in (0.5, 1.0, 2.0, 4.0)]
    assert all(np.diff(vals) >= -1e-8)


def test_drawdown_before_rally_examples():
    assert drawdown_before_rally(BM0, RiskQuery(alpha=0.3, beta=3 / 7)).value == pytest.approx(0.5)
    mu, s2 = 0.3, 1.2
    bm = PriceModel(ProcessSpec.brownian(mu, s2))
    alpha = 0.25
    a = -math.log1p(-alpha)
    rep = drawdown_before_rally(bm, RiskQuery(alpha=alpha, beta=math.expm1(a)))
    assert rep.value == pytest.approx(bm_symmetric(mu, s2, a), rel=1e-12)
    with pytest.raises(ValueError):
        drawdown_before_rally(bm, RiskQuery(alpha=0.1, beta=0.5))


def test_equal_levels_sum_rule():
    for model in (CW, JD, BM0):
        eng = ScaleEngine(model.spec)
        a = RiskQuery(alpha=0.3).a
        p = drawdown_before_rally(model, RiskQuery(alpha=0.3, beta=math.expm1(a))).value
        assert p + Y_at_hat_tau_atom(eng, a) == pytest.approx(1.0, abs=1e-12)


def test_carr_wu_crash():
    rep = carr_wu_crash_prob(CW, 0.3, 0.1)
    assert within_se(rep.value, CW_CRASH)
    generic = drawdown_before_rally(CW, RiskQuery(alpha=0.3, beta=0.1))
    assert rep.value == pytest.approx(generic.value, abs=1e-5)
    with pytest.raises(ValueError):
        carr_wu_crash_prob(CW, 0.1, 0.5)
    with pytest.raises(ValueError):
        carr_wu_crash_prob(JD, 0.3, 0.1)


def test_carr_wu_symmetric():
    x = 0.3
    sym = carr_wu_symmetric(CW, x)
    a = -math.log1p(-x)
    generic = drawdown_before_rally(CW, RiskQuery(alpha=x, beta=math.expm1(a)))
    assert sym.value == pytest.approx(generic.value, abs=1e-6)
    mu, sigma = 0.1, 0.3
    near = carr_wu_symmetric(PriceModel(ProcessSpec.stable_drift(mu, sigma, 1.999)), x).value
    assert near == pytest.approx(bm_symmetric(mu, 2 * sigma ** 2, a), abs=1e-2)
    # small A = mu a^{alpha-1} / sigma^alpha: driftless stable value (alpha - 1) / alpha
    tiny = carr_wu_symmetric(PriceModel(ProcessSpec.stable_drift(1e-7, 1.0, 1.5)), x).value
    assert tiny == pytest.approx(0.5 / 1.5, abs=1e-5)


def test_long_horizon_bracket_stays_ordered():
    rep = drawdown_before_rally(JD, RiskQuery(alpha=0.3, beta=0.25, horizon=2.0))
    assert rep.details["lower"] <= rep.details["upper"]
    assert rep.error_estimate >= 0
    assert rep.value == pytest.approx(drawdown_before_rally(JD, RiskQuery(alpha=0.3, beta=0.25)).value, abs=1e-6)


def test_finite_horizon_drawdown_first_is_bracketed():
    q = RiskQuery(alpha=0.3, beta=0.25, horizon=1.0)
    rep = drawdown_before_rally(JD, q)
    assert rep.method == "bounds"
    lo, hi = rep.details["lower"], rep.details["upper"]
    assert lo - 1e-9 <= rep.value <= hi + 1e-9
    # half-width plus the inversion errors of both ends
    assert rep.error_estimate >= (hi - lo) / 2
    assert hi <= drawdown_before_rally(JD, RiskQuery(alpha=0.3, beta=0.25)).value + 1e-9


def test_finite_horizon_monotone_and_bounded():
    prev = 0.0
    for T in (0.5, 1.0, 2.0, 5.0):
        v = prob_new_min_at_drawdown(JD, RiskQuery(alpha=0.3, horizon=T)).value
        assert v >= prev - 1e-8
        prev = v
    assert prev <= prob_new_min_at_drawdown(JD, RiskQuery(alpha=0.3)).value + 1e-8
    d = [prob_drawdown_before(JD, RiskQuery(alpha=0.3, horizon=T)).value for T in (0.5, 1.0, 2.0)]
    assert all(np.diff(d) >= -1e-8) and d[-1] <= 1.0


def test_short_horizon_falls_back_to_simulation():
    model = PriceModel(ProcessSpec.brownian(0.05, 0.04))
    rep = prob_drawdown_before(model, RiskQuery(alpha=0.2, horizon=0.05), fallback_paths=5000, seed=3)
    assert rep.method == "simulation"
    assert rep.details["truncated_at_T"] is True
    again = prob_drawdown_before(model, RiskQuery(alpha=0.2, horizon=0.05), fallback_paths=5000, seed=3)
    assert again.value == rep.value
    with pytest.raises(Exception):
        prob_drawdown_before(model, RiskQuery(alpha=0.2, horizon=0.05), fallback_paths=0)


def test_report_serialisation(tmp_path):
    rep = drawdown_before_rally(JD, RiskQuery(alpha=0.3, beta=0.25))
    back = RiskReport.from_dict(json.loads(rep.to_json()))
    assert back == rep
    inf_rep = expected_drawdown_at_D(PriceModel(ProcessSpec.brownian(0.3, 0.04)), RiskQuery(alpha=0.1))
    assert json.loads(inf_rep.to_json())["query"]["horizon"] == "inf"
    path = tmp_path / "r.csv"
    write_reports_csv(path, [rep, inf_rep])
    rows = list(csv.DictReader(open(path)))
    assert float(rows[0]["value"]) == rep.value
    assert rows[1]["horizon"] == "inf"


def test_reproducible():
    q = RiskQuery(alpha=0.3, beta=0.25, horizon=1.0)
    assert drawdown_before_rally(JD, q) == drawdown_before_rally(JD, q)


@settings(max_examples=25)
@given(st.floats(0.05, 0.6), st.floats(0.05, 0.6), st.floats(0.05, 0.6))
def test_drawdown_before_rally_monotone(alpha1, alpha2, beta_frac):
    # P[tau_a < hat_tau_b] falls with a and rises with b
    lo, hi = sorted((alpha1, alpha2))
    b = min(-math.log1p(-lo), 0.5) * beta_frac
    beta = math.expm1(b)
    p_lo = drawdown_before_rally(JD, RiskQuery(alpha=lo, beta=beta)).value
    p_hi = drawdown_before_rally(JD, RiskQuery(alpha=hi, beta=beta)).value
    assert p_hi <= p_lo + 1e-6
    p_bigger_b = drawdown_before_rally(JD, RiskQuery(alpha=lo, beta=math.expm1(min(1.3 * b, -math.log1p(-lo))))).value
    assert p_bigger_b >= p_lo - 1e-6
