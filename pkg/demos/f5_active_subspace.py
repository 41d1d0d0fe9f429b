"""
Learning a one-dimensional active subspace
==========================================

f5 on the unit cube only depends on the sum of its coordinates. We fit the
first-layer matrix on cross-validation loss and look at what it learned.
"""

import numpy as np

from twolayer import (
    GreedyConfig,
    KernelSpec,
    OptimConfig,
    fit_greedy,
    metrics,
    optimize_first_layer,
    sample_unit_cube,
    spectral_report,
    synth_function,
)

X = sample_unit_cube(5, 2000, seed=0)
y = synth_function("f5", X)
X_test = sample_unit_cube(5, 10_000, seed=1000)
y_test = synth_function("f5", X_test)

# exp(-||x - y|| / sqrt(d)) as the base kernel
spec = KernelSpec("matern0", 1 / np.sqrt(5))

layer, trace = optimize_first_layer(spec, (X, y), OptimConfig(max_epochs=15, seed=0))
for epoch, loss, seconds in trace.rows():
    print(f"epoch {epoch:2d}  loss {loss:8.4f}  ({seconds:.2f}s)")
print("stopped:", trace.stop_reason, "| best epoch", trace.best_epoch + 1)

# The leading right singular vector should point along (1, ..., 1).
report = spectral_report(layer)
v = report.right_singular_vectors[:, 0]
angle = np.degrees(np.arccos(abs(v @ np.ones(5)) / np.sqrt(5)))
print("singular values ", np.round(report.singular_values, 4))
print("cumulative power", np.round(report.cumulative_power, 3))
print(f"angle to (1,...,1): {angle:.2f} deg")

# Greedy expansions of 100 centers: learned layer against a tuned length scale.
cfg = GreedyConfig("f_greedy", 100)
learned = fit_greedy(spec, layer, X, y, cfg)
print("two-layer    ", metrics(y_test, learned.predict(X_test)))

best = None
for eps in np.geomspace(0.05, 10, 10):
    model = fit_greedy(spec.with_length_scale(eps / np.sqrt(5)), None, X, y, cfg)
    m = metrics(y_test, model.predict(X_test))
    if best is None or m["mse"] < best[1]["mse"]:
        best = (eps, m)
print(f"best eps {best[0]:.3g}", best[1])
