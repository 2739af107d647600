"""
Other ways to split the same problem
====================================

Blockwise constraints, an augmented Lagrangian, a primal-dual form on
the conjugate of the loss, and the classic baselines ADMM and dual
gradient descent. All of them land on the oracle solution.
"""

from egvfl import (SolverConfig, make_problem, partition_vertical, relative_error, run,
                   solve_ridge_oracle, synth_regression)

A, b = synth_regression(200, 50, cond=1e3, seed=1)
problem = make_problem(partition_vertical(A, b, 5))
oracle = solve_ridge_oracle(problem)

budgets = {"eg_blockwise": 15000, "eg_augmented": 2000, "eg_dual": 700, "admm": 700,
           "dual_gd": 4500}
for name, K in budgets.items():
    rec = run(SolverConfig(name, K=K, report_every=K), problem, oracle)
    print("%-13s K=%-6d rel err %.1e  violation %.1e" % (
        name, K, relative_error(problem, oracle, rec.final_state.x), rec.column("violation")[-1]))
