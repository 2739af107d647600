"""
Compressed messages
===================

Clients upload compressed differences against rarely refreshed
reference points. RandK is unbiased; TopK is biased and needs error
feedback. The traffic ledger counts every scalar that crosses the wire.
"""

import numpy as np

from egvfl import Compressor, SolverConfig, make_problem, partition_vertical, run, synth_regression
from egvfl.comm import compress, rng_stream
from egvfl.solvers import resolve_gamma

x = np.arange(1.0, 11.0)
print("randk 30%:", compress(Compressor("randk", 0.3), x, rng_stream(1, 0, 0, "randk"))[0])
print("topk 30%: ", compress(Compressor("topk", 0.3), x)[0])

A, b = synth_regression(200, 50, cond=1e3, seed=1)
problem = make_problem(partition_vertical(A, b, 5))
K = 3000

runs = {
    "eg_basic": SolverConfig("eg_basic", K=K, report_every=K),
    "randk10": SolverConfig("eg_compress_unbiased", compressor=Compressor("randk", 0.1), K=K,
                            report_every=K),
    "topk25+ef": SolverConfig("eg_compress_biased", compressor=Compressor("topk", 0.25), K=K,
                              report_every=K),
    "partial": SolverConfig("eg_partial", K=K, report_every=K),
}
print("%-10s %10s %12s %10s" % ("run", "subopt", "up/iter", "gamma"))
for name, cfg in runs.items():
    rec = run(cfg, problem)
    up = rec.metadata["ledger"]["up"] / K
    print("%-10s %10.2e %12.1f %10.3g" % (name, rec.column("subopt")[-1], up, rec.metadata["gamma"]))

# the step rules for compressed variants are conservative; a larger
# multiple of the rule still converges here
g = 8 * resolve_gamma(runs["randk10"], problem)
rec = run(SolverConfig("eg_compress_unbiased", gamma=g, compressor=Compressor("randk", 0.1),
                       K=K, report_every=K), problem)
print("randk10 at 8x rule: subopt %.2e" % rec.column("subopt")[-1])
