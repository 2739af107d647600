"""
Data files, configs and the command line
========================================

LibSVM text in, experiment config, CSV records out, then a comparison.
Everything lands in a temporary directory.
"""

import os
import tempfile

from egvfl import dump_libsvm, synth_regression
from egvfl.cli import main

work = tempfile.mkdtemp()
A, b = synth_regression(60, 12, cond=100.0, seed=3)
data = os.path.join(work, "toy.svm")
with open(data, "w") as fh:
    fh.write(dump_libsvm(A, b))

cfg = os.path.join(work, "toy.cfg")
with open(cfg, "w") as fh:
    fh.write(f"""\
data = libsvm
path = {data}
n_clients = 3
K = 400
report_every = 20

[solver.eg]
variant = eg_basic

[solver.eg_beta]
variant = eg_basic
beta_trick = true

[solver.gd]
""")

out = os.path.join(work, "out")
main(["run", cfg, "--outdir", out])
main(["compare"] + [os.path.join(out, f"{n}-1.csv") for n in ("eg", "eg_beta", "gd")])
main(["selftest", "--quiet"])
