"""Built-in invariant suite run by ``egvfl selftest``.

Each check is a small function raising AssertionError on failure; the
driver reports every check by name and returns the failures.
"""

import time

import numpy as np

from .comm import Compressor, EncryptionScheme, NoiseSpec, compress, rng_stream
from .dataio import partition_vertical, synth_regression
from .metrics import solve_ridge_oracle
from .problem import make_problem, step_size
from .solvers import baselines, extragradient as eg, stochastic as st
from .solvers.runner import relative_error, rule_constants
from .solvers.state import SolverConfig, init_state, state_at

# iterations for eg_basic to reach 1e-6 relative error on the selftest
# instance, about 1.5x the measured count
CONVERGENCE_BUDGET = 600


def _instance(n=3, seed=0):
    A, b = synth_regression(40, 12, cond=10.0, seed=seed, scale=40.0)
    return make_problem(partition_vertical(A, b, n))


def _trajectory(step, state, k=25):
    out = []
    for _ in range(k):
        state = step(state)
        out.append(state)
    return out


def _same(ta, tb):
    for a, b in zip(ta, tb):
        for va, vb in zip(a.x + [a.z, a.y], b.x + [b.z, b.y]):
            assert np.array_equal(va, vb), "trajectories differ"


def check_reduction_identities(pb):
    g = 0.02
    s0 = init_state(pb)
    basic = _trajectory(lambda s: eg.eg_basic_step(s, pb, g), s0)
    _same(basic, _trajectory(lambda s: eg.eg_augmented_step(s, pb, g, 0.0), s0))
    _same(basic, _trajectory(lambda s: eg.eg_noise_step(s, pb, g, NoiseSpec(0.0), 3), s0))
    _same(basic, _trajectory(lambda s: eg.eg_encrypted_step(s, pb, g, EncryptionScheme()), s0))
    ident = Compressor("identity")
    ta = _trajectory(lambda s: st.eg_compress_unbiased_step(s, pb, g, 0.3, ident, 5), s0)
    tb = _trajectory(lambda s: st.eg_compress_biased_step(s, pb, g, 0.3, ident, 5), s0)
    _same(ta, tb)
    assert all(not np.any(e) for s in tb for e in [s.errors.e] + s.errors.e_i)
    A, b = synth_regression(30, 6, seed=2, scale=30.0)
    one = make_problem(partition_vertical(A, b, 1))
    t1 = _trajectory(lambda s: eg.eg_basic_step(s, one, g), init_state(one))
    t9 = _trajectory(lambda s: eg.eg_blockwise_step(s, one, g), init_state(one, "eg_blockwise"))
    _same(t1, t9)


def check_compressor_laws(draws=20_000):
    rng = np.random.default_rng(7)
    x = rng.standard_normal(20)
    c = Compressor("randk", 0.25)
    samples = np.array([compress(c, x, rng_stream(1, 0, k, "law"))[0] for k in range(draws)])
    assert np.linalg.norm(samples.mean(axis=0) - x) <= 3e-2 * np.linalg.norm(x)
    second = np.mean(np.sum(samples ** 2, axis=1))
    assert second <= (20 / 5) * 1.05 * (x @ x)
    t = Compressor("topk", 0.25)
    for _ in range(200):
        v = rng.standard_normal(20)
        out, _ = compress(t, v)
        assert np.sum((out - v) ** 2) <= (1 - 5 / 20) * (v @ v) + 1e-12


def check_oracle(pb):
    orc = solve_ridge_oracle(pb)
    A = pb.dataset.full_matrix()
    M = A.T @ A + 2 * pb.reg.lam * np.eye(A.shape[1])
    res = np.linalg.norm(M @ orc.x_flat - A.T @ pb.dataset.labels)
    assert res <= 1e-9, f"normal-equation residual {res:g}"


def check_fixed_points(pb):
    orc = solve_ridge_oracle(pb)
    c = pb.constants()
    g = step_size("eg_basic", c).gamma
    rho = 1.0
    steps = {
        "eg_basic": lambda s: eg.eg_basic_step(s, pb, g),
        "eg_prox": lambda s: eg.eg_prox_step(s, pb, g),
        "eg_encrypted": lambda s: eg.eg_encrypted_step(s, pb, g, EncryptionScheme("scaled_mask")),
        "eg_blockwise": lambda s: eg.eg_blockwise_step(s, pb, g),
        "eg_augmented": lambda s: eg.eg_augmented_step(s, pb, g, rho),
        "eg_dual": lambda s: eg.eg_dual_step(s, pb, g),
        "gd": lambda s: baselines.gd_step(s, pb, g),
        "nesterov": lambda s: baselines.nesterov_step(s, pb, g, 0.5),
        "admm": lambda s: baselines.admm_step(s, pb, rho),
        "dual_gd": lambda s: baselines.dual_gd_step(s, pb, 0.01),
    }
    for name, step in steps.items():
        s0 = state_at(pb, orc.x_star, orc.z_star, orc.y_star, name)
        s1 = step(s0)
        move = max(np.max(np.abs(a - b)) for a, b in zip(s0.x + [s0.z, s0.y], s1.x + [s1.z, s1.y]))
        assert move <= 1e-12, f"{name} moved {move:g} from the saddle point"


def check_convergence_budget(pb, lambda_scale=1.0):
    orc = solve_ridge_oracle(pb)
    c = rule_constants(SolverConfig(), pb)
    c["lambda_max"] *= lambda_scale
    g = step_size("eg_basic", c).gamma
    s = init_state(pb)
    for _ in range(CONVERGENCE_BUDGET):
        s = eg.eg_basic_step(s, pb, g)
    err = relative_error(pb, orc, s.x)
    assert err <= 1e-6, f"relative error {err:.2e} after {CONVERGENCE_BUDGET} iterations"


def run_selftest(lambda_scale=1.0, report=print):
    """Run every check; return the list of failed check names.

    `lambda_scale` multiplies lambda_max inside the step rule of the
    convergence-budget check only (fault injection).
    """
    pb = _instance()
    checks = [
        ("reduction identities", lambda: check_reduction_identities(pb)),
        ("compressor laws", check_compressor_laws),
        ("oracle residual", lambda: check_oracle(pb)),
        ("fixed points", lambda: check_fixed_points(pb)),
        ("convergence budget", lambda: check_convergence_budget(pb, lambda_scale)),
    ]
    failed = []
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            fn()
        except AssertionError as exc:
            failed.append(name)
            report(f"FAIL {name}: {exc}")
            continue
        report(f"ok   {name} ({time.perf_counter() - t0:.2f}s)")
    return failed
