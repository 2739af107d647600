"""Iteration driver: resolves step sizes, runs K steps, samples metrics."""

import math

import numpy as np

from ..comm import TrafficLedger
from ..errors import DivergenceError
from ..metrics import RunRecord, metric_row, solve_oracle
from ..problem import step_size
from . import baselines, extragradient as eg, stochastic as st
from .state import check_finite, init_state


def resolve_rho(config, problem):
    if config.rho != "auto":
        return float(config.rho)
    return 1.0 / math.sqrt(problem.lambda_max)


def rule_constants(config, problem):
    """Problem constants plus the config-dependent ones the rules read."""
    c = problem.constants()
    comp = config.compressor
    # compression acts on length-s vectors
    c.update(
        p=config.p,
        shared_seed=comp.rng_mode == "shared_seed",
        omega=comp.omega(problem.s),
        delta=comp.delta(problem.s),
        rho=resolve_rho(config, problem),
        sigma=config.noise.sigma,
        radius=config.radius,
        K=config.K,
    )
    if config.variant == "eg_coord":
        c["shared_seed"] = comp.rng_mode == "shared_seed"
    return {k: v for k, v in c.items() if v is not None}


def resolve_gamma(config, problem):
    if config.gamma != "auto":
        return float(config.gamma)
    if config.variant == "admm":
        return float("nan")
    return step_size(config.variant, rule_constants(config, problem)).gamma


def make_stepper(config, problem, gamma, ledger):
    """Return ``step(state) -> state`` for the configured variant."""
    v = config.variant
    seed = config.master_seed
    if v == "eg_basic":
        return lambda s: eg.eg_basic_step(s, problem, gamma, ledger)
    if v == "eg_prox":
        return lambda s: eg.eg_prox_step(s, problem, gamma, ledger)
    if v == "eg_noise":
        return lambda s: eg.eg_noise_step(s, problem, gamma, config.noise, seed, ledger)
    if v == "eg_encrypted":
        return lambda s: eg.eg_encrypted_step(s, problem, gamma, config.scheme, ledger)
    if v == "eg_blockwise":
        return lambda s: eg.eg_blockwise_step(s, problem, gamma, ledger)
    if v == "eg_augmented":
        rho = resolve_rho(config, problem)
        return lambda s: eg.eg_augmented_step(s, problem, gamma, rho, ledger)
    if v == "eg_dual":
        return lambda s: eg.eg_dual_step(s, problem, gamma, ledger)
    if v == "eg_nonconvex":
        gw = config.gamma_w
        return lambda s: eg.eg_nonconvex_step(s, problem, gamma, gw, ledger)
    if v == "eg_compress_unbiased":
        return lambda s: st.eg_compress_unbiased_step(
            s, problem, gamma, config.p, config.compressor, seed, ledger)
    if v == "eg_compress_biased":
        return lambda s: st.eg_compress_biased_step(
            s, problem, gamma, config.p, config.compressor, seed, ledger)
    if v == "eg_partial":
        return lambda s: st.eg_partial_step(s, problem, gamma, config.p, seed, ledger)
    if v == "eg_coord":
        return lambda s: st.eg_coord_step(
            s, problem, gamma, config.p, config.coords, config.compressor.rng_mode, seed, ledger)
    if v == "gd":
        return lambda s: baselines.gd_step(s, problem, gamma, ledger)
    if v == "nesterov":
        c = problem.constants()
        L_smooth = c["lambda_max"] * c["L_l"] + c["L_r"]
        mom = baselines.nesterov_momentum(L_smooth, c["mu_r"])
        return lambda s: baselines.nesterov_step(s, problem, gamma, mom, ledger)
    if v == "admm":
        rho = resolve_rho(config, problem)
        return lambda s: baselines.admm_step(
            s, problem, rho, config.admm_inner, config.inner_tol, ledger)
    if v == "dual_gd":
        return lambda s: baselines.dual_gd_step(s, problem, gamma, ledger)
    raise ValueError(f"no stepper for {v!r}")


def _metric_point(state, config):
    if config.metric_iterate == "average" and state.n_avg > 0:
        return state.x_avg, state.z_avg, state.y_avg
    return state.x, state.z, state.y


_UNSET = object()


def run(config, problem, oracle=_UNSET, state=None):
    """Drive `config.K` iterations of the configured solver.

    Metrics are sampled at iteration 0, every ``report_every`` iterations
    and at the last iteration. `oracle` defaults to the closed-form (or
    high-accuracy) solution; pass ``None`` to skip oracle-based metrics.

    Returns
    -------
    RunRecord
        ``final_state`` holds the last iterates; ``averages`` holds the
        running means of the half-step iterates.

    Raises
    ------
    DivergenceError
        With the failing iteration index attached.
    """
    if oracle is _UNSET:
        oracle = solve_oracle(problem)
    gamma = resolve_gamma(config, problem)
    ledger = TrafficLedger()
    if state is None:
        state = init_state(problem, config.variant)
    step = make_stepper(config, problem, gamma, ledger)

    meta = {
        "config": config.to_dict(),
        "gamma": gamma,
        "rho": resolve_rho(config, problem) if config.variant in ("eg_augmented", "admm") else None,
        "beta": problem.beta,
        "constants": rule_constants(config, problem),
        "seed": config.master_seed,
        "status": "ok",
    }
    record = RunRecord(metadata=meta)
    record.rows.append(metric_row(problem, oracle, *_metric_point(state, config),
                                  ledger.snapshot(), 0))
    for k in range(1, config.K + 1):
        try:
            state = step(state)
            check_finite(state)
        except DivergenceError as exc:
            raise DivergenceError(str(exc).split(": ", 1)[-1], k) from None
        except FloatingPointError as exc:
            raise DivergenceError(str(exc), k) from None
        state.record_average()
        if k % config.report_every == 0 or k == config.K:
            record.rows.append(metric_row(problem, oracle, *_metric_point(state, config),
                                          ledger.snapshot(), k))
    record.final_state = state
    if state.n_avg:
        record.averages = (state.x_avg, state.z_avg, state.y_avg)
    meta["ledger"] = dict(zip(("up", "down", "full_sync_rounds", "flops"), ledger.snapshot()))
    return record


def relative_error(problem, oracle, x_blocks):
    xs = oracle.x_flat
    return float(np.linalg.norm(np.concatenate(x_blocks) - xs) / np.linalg.norm(xs))
