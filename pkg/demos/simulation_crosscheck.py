"""Monte Carlo against the analytic laws.

Brownian motion: P[hat_Y(tau_a) = 0] and the law of the running minimum.
Stable(1.5): distribution of the running maximum at the first drawup.
"""
import math

import numpy as np

from sndrawdown import ProcessSpec, ScaleEngine
from sndrawdown.drawdown_laws import hatY_atom, max_at_hat_tau_cdf
from sndrawdown.mc_oracle import SimConfig, estimate, ks_distance, simulate

bm = ProcessSpec.brownian(0.3, 1.0)
paths = simulate(bm, SimConfig(dt=1e-2, n_paths=50_000, seed=7), a=1.0)
est = estimate(lambda p: (p.hatY_at_tau <= 0).astype(float), paths)
print(f"BM: P[new minimum at tau_1]  MC {est.value:.4f} +- {est.standard_error:.4f}"
      f"  exact {hatY_atom(ScaleEngine(bm), 1.0):.4f}")

stable = ProcessSpec.stable(1.5)
eng = ScaleEngine(stable)
paths = simulate(stable, SimConfig(n_paths=20_000, seed=3), b=1.0)
zs = np.linspace(0.05, 0.95, 7)
emp = [np.mean(paths.X_bar_hat <= z) for z in zs]
print("\nstable(1.5): cdf of the supremum at the first drawup of size 1")
for z, e in zip(zs, emp):
    print(f"  z={z:.2f}: MC {e:.4f}  exact {max_at_hat_tau_cdf(eng, 1.0, z):.4f}")
print(f"  KS vs 1 - (1 - z)^0.5: {ks_distance(paths.X_bar_hat, lambda z: 1 - np.sqrt(np.clip(1 - z, 0, 1))):.4f}")
print(f"  (1/sqrt(n) = {1 / math.sqrt(len(paths)):.4f})")
