"""
Noise and masking
=================

Gaussian noise on every message hides the exchanged vectors at the
cost of a floor on accuracy. Linear masking schemes decode exactly,
so they leave the trajectory untouched.
"""

import numpy as np

from egvfl import (EncryptionScheme, NoiseSpec, SolverConfig, make_problem, partition_vertical,
                   run, step_size, synth_regression)
from egvfl.comm import decrypt_linear, encrypt

A, b = synth_regression(200, 50, cond=1e3, seed=1)
problem = make_problem(partition_vertical(A, b, 5))
gamma = step_size("eg_basic", problem.constants()).gamma

for sigma in (0.0, 1e-3, 1e-2, 1e-1):
    finals = [run(SolverConfig("eg_noise", gamma=gamma, noise=NoiseSpec(sigma), K=1000,
                               master_seed=seed, report_every=1000), problem).column("subopt")[-1]
              for seed in range(1, 6)]
    print("sigma %-6g median subopt %.2e" % (sigma, np.median(finals)))

scheme = EncryptionScheme("scaled_mask")
u, v = np.ones(4), np.arange(4.0)
print("D(2 E(u) - E(v)) =", decrypt_linear(scheme, 2 * encrypt(scheme, u) - encrypt(scheme, v)))

plain = run(SolverConfig("eg_basic", K=200, report_every=200), problem)
masked = run(SolverConfig("eg_encrypted", scheme=scheme, K=200, report_every=200), problem)
print("masked vs plain final subopt:", plain.column("subopt")[-1], masked.column("subopt")[-1])
