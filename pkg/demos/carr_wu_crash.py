"""Stable log-price with drift: crash before rally.

Compares the Mittag-Leffler closed form for equal levels with the generic
scale-function route, then traces the crash probability over rally sizes.
"""
from sndrawdown import PriceModel, ProcessSpec, RiskQuery
from sndrawdown.risk_analytics import carr_wu_crash_prob, carr_wu_symmetric, drawdown_before_rally

model = PriceModel(ProcessSpec.stable_drift(0.1, 0.3, 1.5))

print("equal log levels: closed form vs generic")
for alpha in (0.1, 0.2, 0.4):
    # a 100 alpha % drawdown and the rally of the same log size
    beta = alpha / (1 - alpha)
    sym = carr_wu_symmetric(model, alpha).value
    gen = drawdown_before_rally(model, RiskQuery(alpha=alpha, beta=beta)).value
    print(f"  alpha={alpha:.1f}: {sym:.10f}  {gen:.10f}  diff {abs(sym - gen):.1e}")

print("\ncrash of size x_dd = 0.3 before a rally of size y")
for y in (0.05, 0.1, 0.2):
    rep = carr_wu_crash_prob(model, 0.3, y)
    print(f"  y={y:.2f}: {rep.value:.6f}")
