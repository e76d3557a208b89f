"""
Approximating a map from measures to measures
=============================================

The target sends a context measure and a query point to an output measure.
A greedy delta-packing of the samples yields retracted Voronoi cells, the
compiled indicator networks pick out the cell of each input, and the
approximator returns the target's value at that cell's landmark.  Off a
small trifling region the error is at most the modulus of continuity at delta.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from picnet.harness.experiment import ExperimentConfig, run_experiment
from picnet.harness.samples import generate_samples
from picnet.harness.targets import target_library
from picnet.partition import assign_cells, build_approximator, greedy_packing

config = ExperimentConfig(C=2, N=2, d=1, M=2, D=1, num_samples=300, seed=11,
                          delta=[0.1, 0.2, 0.4], delta_star=[0.05, 0.1, 0.2], target_name="barycentric")
samples = generate_samples(config)
f = target_library(config.target_name, config.M, config.D, config.C)
print("Lipschitz constant of the target:", f.lipschitz_constant)

# %%
# One packing in detail.
packing = greedy_packing(samples, 0.2, 0.1)
cells = assign_cells(packing, samples)
print(f"K = {packing.K} landmarks, trifling fraction {cells.trifling.mean():.3f}")

f_hat = build_approximator(packing, f)
print("approximator depth", f_hat.depth, "width", f_hat.width)
z = packing.landmarks[3]
print("at a landmark:", f_hat(z.flat()), "target:", f(z).atoms.ravel())

# %%
# The full experiment, one row per delta.
report = run_experiment(config)
print(report.to_csv())

# %%
# Error against delta, next to the bound L * delta.
rows = report.rows
delta = np.array([r.delta for r in rows])
fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(delta, [r.sup_err_approx_region for r in rows], "o-", label="sup error, approximation region")
ax.plot(delta, [r.bound_omega_delta for r in rows], "k--", label="L * delta")
ax.set_xlabel("delta")
ax.legend()
fig.tight_layout()
fig.savefig("approximation_error.svg")
print("wrote approximation_error.svg")
