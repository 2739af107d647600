"""
Ridge regression as a saddle point
==================================

Five clients each hold a slice of the features. The label owner keeps
z (the predicted scores) and the dual variable y; the clients keep x_i.
ExtraGradient on the Lagrangian reaches the same point as the closed
form normal equations.
"""

import numpy as np

from egvfl import (SolverConfig, apply_beta_trick, make_problem, partition_vertical,
                   relative_error, run, solve_ridge_oracle, synth_regression)

A, b = synth_regression(200, 50, cond=1e3, seed=1)
problem = make_problem(partition_vertical(A, b, 5))
print("feature split:", problem.dataset.feature_counts)
print("lambda = %.3g, lambda_max = %.4g" % (problem.reg.lam, problem.lambda_max))

# the oracle solves (A^T A + 2 lam I) x = A^T b
oracle = solve_ridge_oracle(problem)

for name in ("eg_basic", "gd", "nesterov"):
    rec = run(SolverConfig(name, K=1500, report_every=500), problem, oracle)
    err = relative_error(problem, oracle, rec.final_state.x)
    print("%-9s gamma=%.3g  subopt %s  rel err %.1e" % (
        name, rec.metadata["gamma"], np.array2string(rec.column("subopt"), precision=2), err))

# Rescaling the loss and the data matrix by beta balances the two
# terms of the step bound. Same minimizer, bigger step.
scaled = apply_beta_trick(problem)
for pb, label in ((problem, "plain"), (scaled, "beta")):
    rec = run(SolverConfig("eg_basic", K=600, report_every=1), pb, solve_ridge_oracle(pb))
    print("%-5s iterations to subopt 1e-4: %s" % (label, rec.iterations_to(1e-4)))
