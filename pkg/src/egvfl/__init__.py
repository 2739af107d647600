"""Extragradient solvers for split-feature (vertical) federated problems.

The package simulates n clients that each hold a column block ``A_i`` of
the data matrix, with the labels on client 0, and solves
``min_x l(sum_i A_i x_i, b) + sum_i r_i(x_i)`` through its Lagrangian
saddle-point form.
"""

from .comm import (
    SHARED, Compressor, EncryptionScheme, ErrorState, NoiseSpec, TrafficLedger, add_noise,
    compress, feedback_update, rng_stream,
)
from .dataio import (
    VerticalDataset, dump_libsvm, load_libsvm, parse_libsvm, partition_vertical,
    synth_regression,
)
from .errors import *  # noqa: F401,F403
from .linalg import block_lambda_bound, lambda_max_gram
from .metrics import (
    OracleSolution, RunRecord, f_rel_subopt, gap_star, lagrangian_value, newgap, read_csv,
    solve_oracle, solve_ridge_oracle,
)
from .problem import (
    ProblemSpec, QuadraticLoss, Regularizer, apply_beta_trick, make_problem, step_size,
)
from .solvers import SolverConfig, init_state, relative_error, run, state_at

__version__ = "0.1.0"
