import numpy as np
import pytest

from egvfl import (
    Compressor, EncryptionScheme, NoiseSpec, SolverConfig, TrafficLedger, make_problem,
    partition_vertical, run, solve_ridge_oracle, synth_regression,
)
from egvfl.errors import ConfigError, DegenerateProblem, DivergenceError
from egvfl.problem import step_size
from egvfl.solvers import (
    admm_step, dual_gd_step, dual_gradient, dual_objective, eg_augmented_step, eg_basic_step,
    eg_blockwise_step, eg_compress_biased_step, eg_compress_unbiased_step, eg_coord_step,
    eg_dual_step, eg_encrypted_step, eg_noise_step, eg_nonconvex_step, eg_partial_step,
    eg_prox_step, gd_step, init_state, model_residual, nesterov_step, relative_error, state_at,
)

from conftest import flat, synthetic_problem


def scalar_problem(reg="none", lam=0.0):
    ds = partition_vertical(np.array([[1.0]]), np.array([1.0]), 1)
    return make_problem(ds, reg=reg, lam=lam)


def random_state(pb, variant="eg_basic", seed=0):
    rng = np.random.default_rng(seed)
    x = [rng.standard_normal(d) for d in pb.dataset.feature_counts]
    return state_at(pb, x, rng.standard_normal(pb.s), rng.standard_normal(pb.s), variant)


def trajectory(step, state, k=30):
    out = []
    for _ in range(k):
        state = step(state)
        out.append(state)
    return out


def assert_identical(ta, tb):
    for a, b in zip(ta, tb):
        for va, vb in zip(a.x + [a.z, a.y], b.x + [b.z, b.y]):
            assert np.array_equal(va, vb)


def assert_close(ta, tb, tol):
    for a, b in zip(ta, tb):
        for va, vb in zip(a.x + [a.z, a.y], b.x + [b.z, b.y]):
            assert np.max(np.abs(va - vb)) <= tol


def test_basic_hand_trace():
    pb = scalar_problem()
    s1 = eg_basic_step(init_state(pb), pb, 0.5)
    assert s1.x[0][0] == 0.0 and s1.z[0] == 0.25 and s1.y[0] == -0.25


def test_zero_step_is_identity(small):
    pb, _ = small
    s0 = random_state(pb)
    for step in (eg_basic_step, eg_prox_step, eg_dual_step):
        s1 = step(s0, pb, 0.0)
        if step is eg_dual_step:
            pairs = zip(s0.x + [s0.y], s1.x + [s1.y])
        else:
            pairs = zip(s0.x + [s0.z, s0.y], s1.x + [s1.z, s1.y])
        for a, b in pairs:
            assert np.array_equal(a, b)


def test_prox_close_to_gradient_step(small):
    pb, _ = small
    s0 = random_state(pb)
    lam = pb.reg.lam
    for gamma in (1e-2, 1e-3):
        a = eg_basic_step(s0, pb, gamma)
        b = eg_prox_step(s0, pb, gamma)
        c = 2 * gamma * lam
        for x, xa, xb, A in zip(s0.x, a.x_half, b.x_half, pb.blocks):
            bound = c * (c * np.linalg.norm(x) + gamma * np.linalg.norm(A.T @ s0.y))
            assert np.linalg.norm(xa - xb) <= bound * (1 + 1e-9)


def test_prox_l1_kills_everything(small):
    pb, _ = small
    big = make_problem(pb.dataset, reg="l1", lam=1e9)
    s1 = eg_prox_step(random_state(big), big, 0.1)
    assert all(not np.any(x) for x in s1.x)


def test_unbiased_rejects_biased_compressor(small):
    pb, _ = small
    with pytest.raises(ConfigError):
        eg_compress_unbiased_step(init_state(pb), pb, 0.01, 0.5, Compressor("topk", 0.5))
    with pytest.raises(ConfigError):
        eg_compress_biased_step(init_state(pb), pb, 0.01, 0.5, Compressor("randk", 0.5))


def test_p_one_refreshes_every_iteration(small):
    pb, _ = small
    s = random_state(pb, seed=1)
    for _ in range(5):
        new = eg_compress_unbiased_step(s, pb, 0.01, 1.0, Compressor("randk", 0.3), 9)
        assert all(np.array_equal(w, x) for w, x in zip(new.w, s.x))
        assert np.array_equal(new.u, s.y)
        assert all(np.array_equal(aw, A @ x) for aw, A, x in zip(new.Aw, pb.blocks, s.x))
        s = new


def test_biased_identity_matches_unbiased_identity(small):
    pb, _ = small
    s0 = random_state(pb, seed=2)
    ident = Compressor()
    ta = trajectory(lambda s: eg_compress_unbiased_step(s, pb, 0.02, 0.3, ident, 4), s0)
    tb = trajectory(lambda s: eg_compress_biased_step(s, pb, 0.02, 0.3, ident, 4), s0)
    assert_identical(ta, tb)
    assert all(not np.any(v) for s in tb for v in [s.errors.e] + s.errors.e_i)


def test_biased_errors_accumulate_with_topk(small):
    pb, _ = small
    s = eg_compress_biased_step(random_state(pb), pb, 0.02, 0.3, Compressor("topk", 0.2), 4)
    assert np.any(s.errors.e) and all(np.any(e) for e in s.errors.e_i)


def test_partial_single_client_matches_unbiased(small):
    pb, _ = small
    A, b = synth_regression(20, 4, seed=5, scale=20.0)
    one = make_problem(partition_vertical(A, b, 1))
    s0 = random_state(one, seed=3)
    ta = trajectory(lambda s: eg_partial_step(s, one, 0.02, 0.3, 8), s0)
    tb = trajectory(lambda s: eg_compress_unbiased_step(s, one, 0.02, 0.3, Compressor(), 8), s0)
    assert all(s.extra["client"] == 0 for s in ta)
    assert_close(ta, tb, 1e-12)


def test_partial_estimator_unbiased(small):
    pb, _ = small
    s = random_state(pb, seed=4)
    x_h = [x + 0.1 for x in s.x]
    n = pb.n
    est = [n * (pb.blocks[i] @ x_h[i] - s.Aw[i]) + sum(s.Aw) for i in range(n)]
    exact = sum(A @ x for A, x in zip(pb.blocks, x_h))
    assert np.allclose(np.mean(est, axis=0), exact, atol=1e-12)


def test_coord_degenerate_dimensions():
    rng = np.random.default_rng(0)
    ds = partition_vertical(rng.standard_normal((1, 3)), np.array([0.7]), 3)
    pb = make_problem(ds)
    s0 = random_state(pb, seed=5)
    ta = trajectory(lambda s: eg_coord_step(s, pb, 0.05, 0.3, master_seed=6), s0)
    tb = trajectory(lambda s: eg_compress_unbiased_step(s, pb, 0.05, 0.3, Compressor(), 6), s0)
    assert_close(ta, tb, 1e-12)


def test_coord_sketch_unbiased_by_enumeration():
    v = np.random.default_rng(1).standard_normal(7)
    s = v.size
    sketches = [s * v[c] * np.eye(s)[c] for c in range(s)]
    assert np.allclose(np.mean(sketches, axis=0), v, rtol=0, atol=1e-15)


def test_noise_zero_sigma_bitwise(small):
    pb, _ = small
    s0 = random_state(pb)
    assert_identical(trajectory(lambda s: eg_basic_step(s, pb, 0.03), s0),
                     trajectory(lambda s: eg_noise_step(s, pb, 0.03, NoiseSpec(0.0), 1), s0))


def test_noise_changes_trajectory(small):
    pb, _ = small
    s0 = random_state(pb)
    a = eg_basic_step(s0, pb, 0.03)
    b = eg_noise_step(s0, pb, 0.03, NoiseSpec(0.1), 1)
    assert not np.array_equal(a.y, b.y)
    # the slack half step uses the clean dual
    assert np.array_equal(a.z_half, b.z_half)


def test_encrypted_schemes(small):
    pb, _ = small
    s0 = random_state(pb)
    base = trajectory(lambda s: eg_basic_step(s, pb, 0.03), s0)
    assert_identical(base, trajectory(
        lambda s: eg_encrypted_step(s, pb, 0.03, EncryptionScheme()), s0))
    assert_close(base, trajectory(
        lambda s: eg_encrypted_step(s, pb, 0.03, EncryptionScheme("scaled_mask", 3.7)), s0), 1e-10)


def test_blockwise_single_block_bitwise():
    A, b = synth_regression(25, 5, seed=8, scale=25.0)
    one = make_problem(partition_vertical(A, b, 1))
    s0 = random_state(one, seed=6)
    sb = random_state(one, "eg_blockwise", seed=6)
    assert_identical(trajectory(lambda s: eg_basic_step(s, one, 0.03), s0),
                     trajectory(lambda s: eg_blockwise_step(s, one, 0.03), sb))


def test_blockwise_rule_uses_local_spectra(reference):
    pb, _ = reference
    c = pb.constants()
    c.pop("lambda_max")
    assert step_size("eg_blockwise", c).gamma > 0


@pytest.mark.slow
def test_blockwise_block_residuals_vanish(reference):
    pb, orc = reference
    rec = run(SolverConfig("eg_blockwise", K=15_000, report_every=15_000), pb, orc)
    s = rec.final_state
    for A, x, z in zip(pb.blocks, s.x, s.z_blocks):
        assert np.linalg.norm(A @ x - z) < 1e-6
    assert relative_error(pb, orc, s.x) < 1e-6


def test_augmented_zero_rho_bitwise(small):
    pb, _ = small
    s0 = random_state(pb)
    assert_identical(trajectory(lambda s: eg_basic_step(s, pb, 0.03), s0),
                     trajectory(lambda s: eg_augmented_step(s, pb, 0.03, 0.0), s0))


@pytest.mark.parametrize("variant,K", [("eg_augmented", 3000), ("eg_dual", 1500)])
def test_reformulations_reach_oracle(reference, variant, K):
    pb, orc = reference
    rec = run(SolverConfig(variant, K=K, report_every=K), pb, orc)
    assert relative_error(pb, orc, rec.final_state.x) < 1e-6


def test_dual_gd_monotone_and_converges(reference):
    pb, orc = reference
    gamma = step_size("dual_gd", pb.constants()).gamma
    assert gamma <= 1 / (1 + pb.lambda_max / (2 * pb.reg.lam))
    s = init_state(pb)
    vals = [dual_objective(pb, s.y)]
    for _ in range(4500):
        s = dual_gd_step(s, pb, gamma)
        vals.append(dual_objective(pb, s.y))
    assert np.all(np.diff(vals) >= -1e-9 * (1 + np.abs(vals[1:])))
    assert relative_error(pb, orc, s.x) < 1e-6


def test_dual_gradient_finite_differences(small):
    pb, _ = small
    y = np.random.default_rng(2).standard_normal(pb.s)
    h = 1e-6
    fd = np.array([(dual_objective(pb, y + h * e) - dual_objective(pb, y - h * e)) / (2 * h)
                   for e in np.eye(pb.s)])
    g = dual_gradient(pb, y)
    assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)


def test_dual_gd_needs_ridge(small):
    pb, _ = small
    flat_pb = make_problem(pb.dataset, reg="none", lam=0.0)
    with pytest.raises(DegenerateProblem):
        dual_gd_step(init_state(flat_pb), flat_pb, 0.1)


def test_nonconvex_frozen_gains_bitwise(small):
    pb, _ = small
    s0 = random_state(pb)
    sn = random_state(pb, "eg_nonconvex")
    assert_identical(trajectory(lambda s: eg_basic_step(s, pb, 0.03), s0),
                     trajectory(lambda s: eg_nonconvex_step(s, pb, 0.03, gamma_w=0.0), sn))


def test_nonconvex_gain_gradient_finite_differences(small):
    pb, _ = small
    s = random_state(pb, "eg_nonconvex")
    y = s.y
    for A, x in zip(pb.blocks, s.x):
        f = lambda w: y @ ((w * A) @ x)  # noqa: E731
        h = 1e-6
        fd = (f(1 + h) - f(1 - h)) / (2 * h)
        assert abs(fd - y @ (A @ x)) <= 1e-6 * (1 + abs(fd))


def test_nonconvex_gains_absorb_label_scaling():
    A, b = synth_regression(60, 12, cond=10.0, seed=3, scale=60.0)
    pb = make_problem(partition_vertical(A, 2 * b, 3), lam=1e-4)
    s = init_state(pb, "eg_nonconvex")
    gamma = step_size("eg_nonconvex", pb.constants()).gamma
    for _ in range(20_000):
        s = eg_nonconvex_step(s, pb, gamma, gamma_w=0.1 * gamma)
    assert model_residual(pb, s) < 1e-4


def test_gd_identity_one_step():
    b = np.array([1.0, -2.0, 0.5])
    pb = make_problem(partition_vertical(np.eye(3), b, 3), reg="none", lam=0.0)
    s = gd_step(init_state(pb), pb, 1.0)
    assert np.array_equal(flat(s.x), b)


def test_nesterov_beats_gd(reference):
    pb, orc = reference
    its = {}
    for v in ("gd", "nesterov"):
        rec = run(SolverConfig(v, K=6000, report_every=1), pb, orc)
        its[v] = rec.iterations_to(1e-6)
    assert its["nesterov"] is not None and its["gd"] is not None
    assert its["nesterov"] < its["gd"]


def test_admm_kkt_at_convergence(reference):
    pb, orc = reference
    rec = run(SolverConfig("admm", K=1000, report_every=1000), pb, orc)
    s = rec.final_state
    Ax = sum(A @ x for A, x in zip(pb.blocks, s.x))
    assert np.linalg.norm(Ax - s.z) <= 1e-8
    for A, x in zip(pb.blocks, s.x):
        assert np.linalg.norm(A.T @ s.y + pb.reg.grad(x)) <= 1e-8
    assert np.linalg.norm(pb.loss.grad(s.z) - s.y) <= 1e-8


def test_admm_inner_loop_matches_closed_form(small):
    pb, _ = small
    s = random_state(pb)
    a = admm_step(s, pb, 1.0)
    b = admm_step(s, pb, 1.0, inner="accelerated", inner_tol=1e-13)
    assert np.allclose(flat(a.x), flat(b.x), atol=1e-9)


def test_admm_l1_through_inner_loop(small):
    pb, _ = small
    l1 = make_problem(pb.dataset, reg="l1", lam=0.5)
    with pytest.raises(DegenerateProblem):
        admm_step(init_state(l1), l1, 1.0)
    from egvfl.metrics import solve_l1_oracle
    orc = solve_l1_oracle(l1)
    s = init_state(l1)
    for _ in range(400):
        s = admm_step(s, l1, 1.0, inner="accelerated", inner_tol=1e-12)
    assert np.linalg.norm(flat(s.x) - orc.x_flat) <= 1e-6 * (1 + np.linalg.norm(orc.x_flat))


def test_eg_prox_l1_reaches_l1_oracle(small):
    pb, _ = small
    l1 = make_problem(pb.dataset, reg="l1", lam=0.5)
    from egvfl.metrics import solve_l1_oracle
    orc = solve_l1_oracle(l1)
    rec = run(SolverConfig("eg_prox", K=6000, report_every=6000), l1, orc)
    assert np.linalg.norm(flat(rec.final_state.x) - orc.x_flat) <= 1e-6


def test_run_zero_iterations(small):
    pb, orc = small
    rec = run(SolverConfig(K=0), pb, orc)
    assert len(rec.rows) == 1 and rec.rows[0][0] == 0 and rec.rows[0][4] == 1.0


def test_run_deterministic(small):
    pb, orc = small
    cfg = SolverConfig("eg_compress_unbiased", compressor=Compressor("randk", 0.2), K=200,
                       report_every=7, master_seed=3)
    a, b = run(cfg, pb, orc), run(cfg, pb, orc)
    assert a.rows == b.rows and a.to_csv() == b.to_csv()
    c = run(SolverConfig("eg_compress_unbiased", compressor=Compressor("randk", 0.2), K=200,
                         report_every=7, master_seed=4), pb, orc)
    assert c.rows != a.rows


def test_run_samples_rows(small):
    pb, orc = small
    rec = run(SolverConfig(K=25, report_every=10), pb, orc)
    assert [r[0] for r in rec.rows] == [0, 10, 20, 25]
    cols = np.array([r[1:4] for r in rec.rows])
    assert np.all(np.diff(cols, axis=0) >= 0)


def test_run_eg_basic_reaches_tolerance(reference):
    pb, orc = reference
    rec = run(SolverConfig(K=1500, report_every=1500), pb, orc)
    assert rec.rows[-1][4] <= 1e-6


def test_averages_are_means_of_half_steps(small):
    pb, orc = small
    rec = run(SolverConfig(K=40, report_every=40), pb, orc)
    s = init_state(pb)
    halves = []
    gamma = rec.metadata["gamma"]
    for _ in range(40):
        s = eg_basic_step(s, pb, gamma)
        halves.append((flat(s.x_half), s.z_half, s.y_half))
    x_avg, z_avg, y_avg = rec.averages
    assert np.max(np.abs(flat(x_avg) - np.mean([h[0] for h in halves], axis=0))) <= 1e-12
    assert np.max(np.abs(z_avg - np.mean([h[1] for h in halves], axis=0))) <= 1e-12
    assert np.max(np.abs(y_avg - np.mean([h[2] for h in halves], axis=0))) <= 1e-12


def test_metric_on_averages_flag(small):
    pb, orc = small
    a = run(SolverConfig(K=30, report_every=30, metric_iterate="average"), pb, orc)
    b = run(SolverConfig(K=30, report_every=30), pb, orc)
    assert a.rows[-1][4] != b.rows[-1][4]


def test_divergence_reports_iteration(small):
    pb, orc = small
    with pytest.raises(DivergenceError) as exc:
        run(SolverConfig(gamma=50.0, K=500), pb, orc)
    assert exc.value.iteration is not None and exc.value.iteration >= 1
    assert str(exc.value).startswith(f"iteration {exc.value.iteration}:")


@pytest.mark.parametrize("variant", ["eg_basic", "eg_compress_unbiased", "eg_compress_biased",
                                     "eg_partial", "eg_coord", "admm", "gd", "eg_encrypted"])
def test_ledgers_never_decrease(small, variant):
    pb, orc = small
    cfg = SolverConfig(variant, compressor=Compressor(
        "topk" if variant == "eg_compress_biased" else "randk" if "compress" in variant
        else "identity", 0.3), K=30, report_every=1)
    rec = run(cfg, pb, orc)
    cols = np.array([r[1:4] for r in rec.rows])
    assert np.all(np.diff(cols, axis=0) >= 0) and np.all(cols[-1] > 0)


def test_basic_ledger_counts(small):
    pb, _ = small
    led = TrafficLedger()
    eg_basic_step(init_state(pb), pb, 0.01, led)
    assert led.scalars_up == 2 * pb.n * pb.s
    assert led.scalars_down == 2 * pb.s
    assert led.full_sync_rounds == 2
