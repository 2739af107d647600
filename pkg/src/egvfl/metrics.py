"""Oracle solutions, convergence criteria and run records.

All quantities are evaluated in the solver's own (possibly rescaled)
variables; the primal objective itself does not depend on the rescaling.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DegenerateProblem, FormatError, SingularOracle, UnsupportedProx
from .problem import sum_blocks

CSV_HEADER = ("iter", "up", "down", "flops", "subopt", "violation", "gapstar", "newgap")


@dataclass
class OracleSolution:
    x_star: list
    z_star: np.ndarray
    y_star: np.ndarray
    f_star: float

    @property
    def x_flat(self):
        return np.concatenate(self.x_star)


def _complete_oracle(problem, x_blocks):
    A = problem.blocks
    z = sum_blocks([Ai @ xi for Ai, xi in zip(A, x_blocks)])
    y = problem.loss.grad(z)
    return OracleSolution(x_blocks, z, y, problem.objective(x_blocks))


def solve_ridge_oracle(problem):
    """Solve ``(A^T A + 2 lam I) x = A^T b`` by Cholesky.

    The system is assembled from the unscaled data, so the solution is
    the same for every beta. One step of iterative refinement follows the
    direct solve.

    Raises
    ------
    SingularOracle
        If the normal matrix is not positive definite.
    """
    reg = problem.reg
    if reg.kind not in ("ridge", "none"):
        raise UnsupportedProx("the closed-form oracle needs a ridge (or no) regularizer")
    lam = reg.lam if reg.kind == "ridge" else 0.0
    A = problem.dataset.full_matrix()
    b = problem.dataset.labels
    M = A.T @ A + 2.0 * lam * np.eye(A.shape[1])
    rhs = A.T @ b
    try:
        fac = cho_factor(M)
    except LinAlgError:
        raise SingularOracle("A^T A + 2 lam I is singular") from None
    x = cho_solve(fac, rhs)
    x = x + cho_solve(fac, rhs - M @ x)
    if not np.all(np.isfinite(x)):
        raise SingularOracle("oracle solve produced non-finite values")
    # solver variables are x itself; the rescaling only touches A and l
    return _complete_oracle(problem, problem.dataset.split_vector(x))


def solve_l1_oracle(problem, tol=1e-13, max_iter=200_000):
    """High-accuracy FISTA solution for the l1-regularized problem."""
    A = problem.dataset.full_matrix()
    b = problem.dataset.labels
    lam = problem.reg.lam
    Lf = np.linalg.norm(A, 2) ** 2
    if Lf == 0:
        raise DegenerateProblem("zero data matrix")
    step = 1.0 / Lf
    x = x_prev = np.zeros(A.shape[1])
    t = 1.0
    for _ in range(max_iter):
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        v = x + ((t - 1) / t_next) * (x - x_prev)
        t = t_next
        g = A.T @ (A @ v - b)
        u = v - step * g
        x_next = np.sign(u) * np.maximum(np.abs(u) - step * lam, 0.0)
        if np.linalg.norm(x_next - x) <= tol * (1 + np.linalg.norm(x_next)):
            x = x_next
            break
        x_prev, x = x, x_next
    return _complete_oracle(problem, problem.dataset.split_vector(x))


def solve_oracle(problem):
    if problem.reg.kind == "l1":
        return solve_l1_oracle(problem)
    return solve_ridge_oracle(problem)


def lagrangian_value(problem, x, z, y):
    """``l(z) + sum_i r_i(x_i) + y^T (sum_i A_i x_i - z)``."""
    Ax = sum_blocks([Ai @ xi for Ai, xi in zip(problem.blocks, x)])
    reg = sum(problem.reg.value(xi) for xi in x)
    return problem.loss.value(z) + reg + float(y @ (Ax - z))


def gap_star(problem, oracle, x, z, y):
    """``L(x, z, y*) - L(x*, z*, y)``; nonnegative by the saddle property."""
    return (lagrangian_value(problem, x, z, oracle.y_star)
            - lagrangian_value(problem, oracle.x_star, oracle.z_star, y))


def constraint_violation(problem, x, z):
    Ax = sum_blocks([Ai @ xi for Ai, xi in zip(problem.blocks, x)])
    return float(np.linalg.norm(Ax - z))


def default_newgap_weight(oracle):
    return float(np.max(np.abs(oracle.y_star))) + 1.0


def newgap(problem, oracle, x, z, C):
    """``[l(z) + r(x) - f*] + C ||A x - z||``.

    With ``C = 0`` this is the plain functional gap, which can be negative
    off the constraint set.
    """
    if C < 0:
        raise ValueError("C must be nonnegative")
    func = problem.loss.value(z) + sum(problem.reg.value(xi) for xi in x) - oracle.f_star
    return func + C * constraint_violation(problem, x, z)


def f_rel_subopt(problem, oracle, x):
    """``(f(x) - f*) / (f(0) - f*)``."""
    f0 = problem.objective([np.zeros_like(xi) for xi in x])
    denom = f0 - oracle.f_star
    if not denom > 0:
        raise DegenerateProblem("f(0) equals f*; relative suboptimality is undefined")
    return (problem.objective(x) - oracle.f_star) / denom


def metric_row(problem, oracle, x, z, y, ledger_snapshot, iteration, C=None):
    up, down, _, flops = ledger_snapshot
    if oracle is None:
        nan = float("nan")
        return (iteration, up, down, flops, nan, constraint_violation(problem, x, z), nan, nan)
    if C is None:
        C = default_newgap_weight(oracle)
    return (
        iteration, up, down, flops,
        float(f_rel_subopt(problem, oracle, x)),
        constraint_violation(problem, x, z),
        float(gap_star(problem, oracle, x, z, y)),
        float(newgap(problem, oracle, x, z, C)),
    )


@dataclass
class RunRecord:
    """Sampled metric rows plus everything needed to replay the run."""

    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    final_state: object = None
    averages: tuple = None
    failed: bool = False

    def column(self, name):
        j = CSV_HEADER.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([repr(int(v)) if j < 4 else repr(float(v)) for j, v in enumerate(r)])
        return buf.getvalue()

    def write(self, csv_path, meta_path=None):
        with open(csv_path, "w", newline="") as fh:
            fh.write(self.to_csv())
        if meta_path is None:
            meta_path = str(csv_path)[:-4] + ".meta.json" if str(csv_path).endswith(".csv") \
                else str(csv_path) + ".meta.json"
        with open(meta_path, "w") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        return meta_path

    def iterations_to(self, threshold, column="subopt"):
        """First sampled iteration at which `column` is at or below `threshold`."""
        vals = self.column(column)
        its = self.column("iter")
        hit = np.flatnonzero(vals <= threshold)
        return int(its[hit[0]]) if hit.size else None


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return str(v)


def read_csv(path):
    """Read a record CSV back into a list of rows; checks the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if tuple(header) != CSV_HEADER:
            raise FormatError(f"{path}: unexpected columns {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise FormatError(f"{path}: line {lineno} has {len(row)} fields")
            try:
                rows.append(tuple(int(v) if j < 4 else float(v) for j, v in enumerate(row)))
            except ValueError:
                raise FormatError(f"{path}: line {lineno} is not numeric") from None
    return RunRecord(rows=rows)
