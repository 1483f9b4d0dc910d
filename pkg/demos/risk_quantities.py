"""Risk quantities for an exponential jump-diffusion price.

S = S0 exp(X) with X a jump diffusion with exponential downward jumps.
A drawdown of relative size alpha, a rally of relative size beta.
"""
import math

from sndrawdown import PriceModel, ProcessSpec, RiskQuery
from sndrawdown.risk_analytics import (drawdown_before_rally, expected_drawdown_at_D,
                                       prob_new_max_at_drawup, prob_new_min_at_drawdown)

model = PriceModel(ProcessSpec.jump_diffusion(0.2, 1.0, 1.0, 2.0), S0=100.0)

print("drawdown of 30% before a 25% rally")
for T in (math.inf, 0.5, 1.0, 2.0):
    rep = drawdown_before_rally(model, RiskQuery(alpha=0.3, beta=0.25, horizon=T))
    print(f"  T={T!s:>5}: {rep.value:.6f} +- {rep.error_estimate:.1e} ({rep.method})")

print("\nnew running minimum at the first 20% drawdown")
for T in (math.inf, 1.0):
    rep = prob_new_min_at_drawdown(model, RiskQuery(alpha=0.2, horizon=T))
    print(f"  T={T!s:>5}: {rep.value:.6f} ({rep.method})")

print("\nnew running maximum at the first 20% rally")
rep = prob_new_max_at_drawup(model, RiskQuery(beta=0.2, horizon=1.0))
print(f"  T=  1.0: {rep.value:.6f} ({rep.method})")

print("\nexpected drawdown (in price units) at the first 10% drawdown before T = 1")
rep = expected_drawdown_at_D(model, RiskQuery(alpha=0.1, horizon=1.0))
print(f"  {rep.value:.6f} ({rep.method})")
