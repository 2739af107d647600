"""Variance-reduced extragradient iterations with reference points.

Half steps pull towards the reference point ``(w, u)`` with weight
``1 - tau = p``; full steps only need compressed (or sampled)
differences against the cached reference products ``A_i w_i`` and
``A_i^T u``. A shared coin refreshes the references with probability p.
"""

import copy

import numpy as np

from ..comm import SHARED, Compressor, compress, feedback_update, rng_stream
from ..errors import ConfigError
from ..problem import sum_blocks
from .extragradient import _ledger


def _coin(master_seed, k, p):
    return bool(rng_stream(master_seed, SHARED, k, "coin").random() < p)


def _key(compressor_or_mode, client):
    mode = getattr(compressor_or_mode, "rng_mode", compressor_or_mode)
    return SHARED if mode == "shared_seed" else client


def _half_step(state, problem, gamma, tau):
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    x, z, y, w, u = state.x, state.z, state.y, state.w, state.u
    x_h = [tau * xi + (1 - tau) * wi - gamma * (atu + reg.grad(xi))
           for xi, wi, atu in zip(x, w, state.Atu)]
    z_h = z - gamma * (loss.grad(z) - y)
    y_h = tau * y + (1 - tau) * u + gamma * (sum_blocks(state.Aw) - z)
    return x_h, z_h, y_h


def _refresh(new, state, problem, L):
    """Reference refresh: ``w = x^k``, ``u = y^k``, uncompressed products."""
    A = problem.blocks
    n, s = problem.n, problem.s
    new.w = [v.copy() for v in state.x]
    new.u = state.y.copy()
    new.Aw = [Ai @ wi for Ai, wi in zip(A, new.w)]
    new.Atu = [Ai.T @ new.u for Ai in A]
    L.up(n * s)
    L.down(s)
    L.compute(2 * s * problem.d)
    L.sync()


def _finish(state, x_new, z_new, y_new, x_h, z_h, y_h):
    new = copy.copy(state)
    new.extra = dict(state.extra)
    new.x, new.z, new.y = x_new, z_new, y_new
    new.x_half, new.z_half, new.y_half = x_h, z_h, y_h
    new.k = state.k + 1
    return new


def eg_compress_unbiased_step(state, problem, gamma, p, compressor=Compressor(),
                              master_seed=0, ledger=None):
    """Compressed ExtraGradient with an unbiased compressor (RandK or identity).

    Client 0 broadcasts ``Q(y_half - u)``; client i uploads
    ``Q(A_i x_i_half - A_i w_i)``.
    """
    if not compressor.unbiased:
        raise ConfigError(
            f"{compressor.kind} is biased; use eg_compress_biased for contractive compressors")
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    s, k, tau = problem.s, state.k, 1.0 - p
    refresh = _coin(master_seed, k, p)

    x_h, z_h, y_h = _half_step(state, problem, gamma, tau)

    q, sent = compress(compressor, y_h - state.u,
                       rng_stream(master_seed, _key(compressor, 0), k, "randk"))
    L.down(sent)
    q_up = []
    for i, (Ai, xh, awi) in enumerate(zip(A, x_h, state.Aw)):
        qi, sent = compress(compressor, Ai @ xh - awi,
                            rng_stream(master_seed, _key(compressor, i), k, "randk"))
        L.up(sent)
        q_up.append(qi)
    L.compute(2 * s * problem.d)

    x_new = [tau * xi + (1 - tau) * wi - gamma * (Ai.T @ (q + state.u) + reg.grad(xh))
             for Ai, xi, wi, xh in zip(A, state.x, state.w, x_h)]
    z_new = state.z - gamma * (loss.grad(z_h) - y_h)
    y_new = (tau * state.y + (1 - tau) * state.u
             + gamma * (sum_blocks([qi + awi for qi, awi in zip(q_up, state.Aw)]) - z_h))

    new = _finish(state, x_new, z_new, y_new, x_h, z_h, y_h)
    if refresh:
        _refresh(new, state, problem, L)
    return new


def eg_compress_biased_step(state, problem, gamma, p, compressor=Compressor("topk", 0.25),
                            master_seed=0, ledger=None):
    """Compressed ExtraGradient with error feedback (TopK or identity).

    Each sender adds its accumulated error to the payload, transmits the
    compressed payload and keeps the remainder as the new error.
    """
    if compressor.kind == "randk":
        raise ConfigError("randk is not contractive; use eg_compress_unbiased")
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    s, k, tau = problem.s, state.k, 1.0 - p
    refresh = _coin(master_seed, k, p)
    err = state.errors

    x_h, z_h, y_h = _half_step(state, problem, gamma, tau)

    payload = y_h - state.u + err.e
    c, sent = compress(compressor, payload)
    L.down(sent)
    e_new = feedback_update(payload, c)
    c_up, e_i_new = [], []
    for Ai, xh, awi, ei in zip(A, x_h, state.Aw, err.e_i):
        payload_i = Ai @ xh - awi + ei
        ci, sent = compress(compressor, payload_i)
        L.up(sent)
        c_up.append(ci)
        e_i_new.append(feedback_update(payload_i, ci))
    L.compute(2 * s * problem.d)

    x_new = [tau * xi + (1 - tau) * wi - gamma * (Ai.T @ (c + state.u) + reg.grad(xh))
             for Ai, xi, wi, xh in zip(A, state.x, state.w, x_h)]
    z_new = state.z - gamma * (loss.grad(z_h) - y_h)
    y_new = (tau * state.y + (1 - tau) * state.u
             + gamma * (sum_blocks([ci + awi for ci, awi in zip(c_up, state.Aw)]) - z_h))

    new = _finish(state, x_new, z_new, y_new, x_h, z_h, y_h)
    new.errors = type(err)(e_new, e_i_new)
    if refresh:
        _refresh(new, state, problem, L)
    return new


def eg_partial_step(state, problem, gamma, p, master_seed=0, ledger=None):
    """ExtraGradient where one uniformly drawn client uploads per round.

    The upload is scaled by n so the aggregate is unbiased.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s, k, tau = problem.n, problem.s, state.k, 1.0 - p
    refresh = _coin(master_seed, k, p)
    ik = int(rng_stream(master_seed, SHARED, k, "client").integers(n))

    x_h, z_h, y_h = _half_step(state, problem, gamma, tau)

    L.down(s)
    diff = A[ik] @ x_h[ik] - state.Aw[ik]
    L.up(s)
    L.compute(s * A[ik].shape[1] + s * problem.d)

    x_new = [tau * xi + (1 - tau) * wi - gamma * (Ai.T @ y_h + reg.grad(xh))
             for Ai, xi, wi, xh in zip(A, state.x, state.w, x_h)]
    z_new = state.z - gamma * (loss.grad(z_h) - y_h)
    y_new = (tau * state.y + (1 - tau) * state.u
             + gamma * (n * diff + sum_blocks(state.Aw) - z_h))

    new = _finish(state, x_new, z_new, y_new, x_h, z_h, y_h)
    new.extra["client"] = ik
    if refresh:
        _refresh(new, state, problem, L)
    return new


def eg_coord_step(state, problem, gamma, p, coords=1, rng_mode="shared_seed",
                  master_seed=0, ledger=None):
    """ExtraGradient with sampled-coordinate sketches of both products.

    Client i evaluates ``coords`` rows of ``A_i (x_half_i - w_i)`` and
    ``coords`` columns of ``A_i^T (y_half - u)`` instead of full
    matrix-vector products; each sketch is rescaled to stay unbiased.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    s, k, tau = problem.s, state.k, 1.0 - p
    refresh = _coin(master_seed, k, p)

    x_h, z_h, y_h = _half_step(state, problem, gamma, tau)
    L.down(s)
    dy = y_h - state.u

    row_sk, col_sk = [], []
    for i, (Ai, xh, wi) in enumerate(zip(A, x_h, state.w)):
        di = Ai.shape[1]
        mr, mc = min(coords, s), min(coords, di)
        rows = rng_stream(master_seed, _key(rng_mode, i), k, "coord_row").choice(
            s, size=mr, replace=False)
        cols = rng_stream(master_seed, _key(rng_mode, i), k, "coord_col").choice(
            di, size=mc, replace=False)
        r = np.zeros(s)
        r[rows] = (s / mr) * (Ai[rows] @ (xh - wi))
        c = np.zeros(di)
        c[cols] = (di / mc) * (Ai[:, cols].T @ dy)
        row_sk.append(r)
        col_sk.append(c)
        L.up(mr)
        L.compute(mr * di + mc * s)

    x_new = [tau * xi + (1 - tau) * wi - gamma * (ci + atu + reg.grad(xh))
             for xi, wi, ci, atu, xh in zip(state.x, state.w, col_sk, state.Atu, x_h)]
    z_new = state.z - gamma * (loss.grad(z_h) - y_h)
    y_new = (tau * state.y + (1 - tau) * state.u
             + gamma * (sum_blocks([ri + awi for ri, awi in zip(row_sk, state.Aw)]) - z_h))

    new = _finish(state, x_new, z_new, y_new, x_h, z_h, y_h)
    if refresh:
        _refresh(new, state, problem, L)
    return new
