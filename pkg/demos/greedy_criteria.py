"""
Comparing greedy selection rules
================================

P-greedy fills space without looking at the target, f-greedy chases the
largest residual, f/P-greedy balances the two.
"""

import numpy as np

from twolayer import GreedyConfig, KernelSpec, fill_distance, fit_greedy, sample_unit_cube, staged_predict

X = sample_unit_cube(2, 1500, seed=3)
f = np.exp(-20 * ((X - 0.3) ** 2).sum(axis=1)) + 0.2 * X[:, 0]
X_test = sample_unit_cube(2, 4000, seed=4)
f_test = np.exp(-20 * ((X_test - 0.3) ** 2).sum(axis=1)) + 0.2 * X_test[:, 0]
spec = KernelSpec("matern2", 3.0)

print("criterion          n=10      n=40      n=80   fill distance")
for criterion in ("p_greedy", "f_greedy", "f_over_p_greedy"):
    model = fit_greedy(spec, None, X, f, GreedyConfig(criterion, 80))
    err = np.abs(staged_predict(model, spec, None, X_test) - f_test[:, None]).max(axis=0)
    h = fill_distance(X, model.centers)
    print(f"{criterion:16s} {err[9]:.2e}  {err[39]:.2e}  {err[79]:.2e}   {h:.3f}")
