"""Scale functions for the four supported families, side by side.

Prints W, W', Z and lambda = W'/W on a small grid and compares every
backend that can serve each family.
"""
import numpy as np

from sndrawdown import ProcessSpec, ScaleEngine
from sndrawdown.scale_functions import Backend

models = {
    "brownian(0.3, 1)": ProcessSpec.brownian(0.3, 1.0),
    "stable(1.5)": ProcessSpec.stable(1.5),
    "stable_drift(0.1, 0.3, 1.5)": ProcessSpec.stable_drift(0.1, 0.3, 1.5),
    "jump_diffusion(0.2, 1, 1, 2)": ProcessSpec.jump_diffusion(0.2, 1.0, 1.0, 2.0),
}
xs = np.array([0.25, 0.5, 1.0, 2.0])
q = 0.2

for name, spec in models.items():
    eng = ScaleEngine(spec, Backend.LAPLACE_INVERSION if spec.family.value == "stable_drift" else "closed")
    print(f"\n{name}   q = {q}")
    print(f"{'x':>6} {'W':>14} {'W_prime':>14} {'Z':>14} {'lambda':>12}")
    for x in xs:
        print(f"{x:6.2f} {eng.W(q, x):14.8f} {eng.W_prime(q, x):14.8f} "
              f"{eng.Z(q, x):14.8f} {eng.lambda_ratio(q, x):12.6f}")

# backend agreement at x = 1
print("\nW(q, 1) by backend")
for name, spec in models.items():
    row = []
    for backend in Backend:
        try:
            row.append(f"{backend.value}={ScaleEngine(spec, backend).W(q, 1.0):.10f}")
        except Exception as exc:  # not every backend serves every family
            row.append(f"{backend.value}=({type(exc).__name__})")
    print(f"  {name}: " + "  ".join(row))
