# Max-affine lower-bound fit: every piece stays below every sample.
import numpy as np

from pwlcis import FitConfig, evaluate, fit

g = np.random.default_rng(1)
x = np.sort(g.uniform(-1, 1, 60))
y = np.abs(x) - 1.0 + 0.05 * g.standard_normal(60)
pts = np.column_stack([x, y])

model, rep = fit(pts, FitConfig(M_candidates=[2, 3, 4], restarts=10, seed=1))
print("chosen pieces:", model.M, " J =", f"{rep.J:.5f}")
print("coefficients (slope, offset):")
print(model.alpha)
gap = y - evaluate(model, x[:, None])
print("smallest gap sample - model:", f"{gap.min():.2e}", "(never negative)")
for line in rep.summary_lines()[:4]:
    print(" ", line)
