"""Deterministic extragradient iterations on the split Lagrangian.

Each step takes a state and returns a new one; the input is never
modified. Client loops run in client order and every aggregation goes
through `sum_blocks`, so trajectories are bitwise reproducible. Traffic
and local work are charged to an optional `TrafficLedger`.
"""

import copy

import numpy as np

from ..comm import EncryptionScheme, NoiseSpec, SHARED, TrafficLedger, add_noise, rng_stream
from ..problem import sum_blocks


def _ledger(ledger):
    return ledger if ledger is not None else TrafficLedger()


def _advance(state, x, z, y, x_half, z_half, y_half):
    new = copy.copy(state)
    new.extra = dict(state.extra)
    new.x, new.z, new.y = x, z, y
    new.x_half, new.z_half, new.y_half = x_half, z_half, y_half
    new.k = state.k + 1
    return new


def _matvec_cost(problem):
    return problem.s * problem.d


def eg_basic_step(state, problem, gamma, ledger=None):
    """One ExtraGradient iteration on ``L(x, z, y)``.

    Client 0 broadcasts ``y``; every client uploads ``A_i x_i``. This
    happens once at the current point and once at the half-step point.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    x, z, y = state.x, state.z, state.y

    L.down(s)
    Ax = [Ai @ xi for Ai, xi in zip(A, x)]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_h = [xi - gamma * (Ai.T @ y + reg.grad(xi)) for Ai, xi in zip(A, x)]
    z_h = z - gamma * (loss.grad(z) - y)
    y_h = y + gamma * (sum_blocks(Ax) - z)

    L.down(s)
    Ax_h = [Ai @ xi for Ai, xi in zip(A, x_h)]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_new = [xi - gamma * (Ai.T @ y_h + reg.grad(xh)) for Ai, xi, xh in zip(A, x, x_h)]
    z_new = z - gamma * (loss.grad(z_h) - y_h)
    y_new = y + gamma * (sum_blocks(Ax_h) - z_h)
    return _advance(state, x_new, z_new, y_new, x_h, z_h, y_h)


def eg_prox_step(state, problem, gamma, ledger=None):
    """ExtraGradient with proximal maps on ``r`` and ``l``.

    The dual step is read as ``y + gamma * (sum A_i x_i - z)``. Works with
    non-smooth regularizers such as l1.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    x, z, y = state.x, state.z, state.y

    L.down(s)
    Ax = [Ai @ xi for Ai, xi in zip(A, x)]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_h = [reg.prox(xi - gamma * (Ai.T @ y), gamma) for Ai, xi in zip(A, x)]
    z_h = loss.prox(z + gamma * y, gamma)
    y_h = y + gamma * (sum_blocks(Ax) - z)

    L.down(s)
    Ax_h = [Ai @ xi for Ai, xi in zip(A, x_h)]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_new = [reg.prox(xi - gamma * (Ai.T @ y_h), gamma) for Ai, xi in zip(A, x)]
    z_new = loss.prox(z + gamma * y_h, gamma)
    y_new = y + gamma * (sum_blocks(Ax_h) - z_h)
    return _advance(state, x_new, z_new, y_new, x_h, z_h, y_h)


def eg_noise_step(state, problem, gamma, noise=NoiseSpec(), master_seed=0, ledger=None):
    """ExtraGradient where every transmitted vector carries additive noise.

    Noise enters the broadcast ``y`` and each uploaded ``A_i x_i`` in both
    rounds. The slack update uses the clean dual held by client 0.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    x, z, y = state.x, state.z, state.y
    k = state.k

    def rng(client, lane):
        return rng_stream(master_seed, client, k, lane)

    L.down(s)
    y_sent = add_noise(noise, y, rng(SHARED, "noise_y"))
    Ax = [add_noise(noise, Ai @ xi, rng(i, "noise_Ax")) for i, (Ai, xi) in enumerate(zip(A, x))]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_h = [xi - gamma * (Ai.T @ y_sent + reg.grad(xi)) for Ai, xi in zip(A, x)]
    z_h = z - gamma * (loss.grad(z) - y)
    y_h = y + gamma * (sum_blocks(Ax) - z)

    L.down(s)
    yh_sent = add_noise(noise, y_h, rng(SHARED, "noise_y_half"))
    Ax_h = [add_noise(noise, Ai @ xi, rng(i, "noise_Ax_half"))
            for i, (Ai, xi) in enumerate(zip(A, x_h))]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_new = [xi - gamma * (Ai.T @ yh_sent + reg.grad(xh)) for Ai, xi, xh in zip(A, x, x_h)]
    z_new = z - gamma * (loss.grad(z_h) - y_h)
    y_new = y + gamma * (sum_blocks(Ax_h) - z_h)
    return _advance(state, x_new, z_new, y_new, x_h, z_h, y_h)


def eg_encrypted_step(state, problem, gamma, scheme=EncryptionScheme(), ledger=None):
    """ExtraGradient where client 0 keeps every iterate.

    Client 0 encodes ``y`` and each ``x_i`` and ships them out; client i
    returns ``A_i^T E(y)`` and ``A_i E(x_i)``; client 0 decodes and runs
    all updates itself.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s, d = problem.n, problem.s, problem.d
    enc, dec = scheme.encrypt, scheme.decrypt
    x, z, y = state.x, state.z, state.y

    def exchange(xs, yv):
        Ey = enc(yv)
        Ex = [enc(xi) for xi in xs]
        L.down(s + d)
        Aty = [dec(Ai.T @ Ey) for Ai in A]
        Ax = [dec(Ai @ exi) for Ai, exi in zip(A, Ex)]
        L.up(d + n * s)
        L.compute(2 * _matvec_cost(problem))
        L.sync()
        return Aty, Ax

    Aty, Ax = exchange(x, y)
    x_h = [xi - gamma * (aty + reg.grad(xi)) for aty, xi in zip(Aty, x)]
    z_h = z - gamma * (loss.grad(z) - y)
    y_h = y + gamma * (sum_blocks(Ax) - z)

    Aty_h, Ax_h = exchange(x_h, y_h)
    x_new = [xi - gamma * (aty + reg.grad(xh)) for aty, xi, xh in zip(Aty_h, x, x_h)]
    z_new = z - gamma * (loss.grad(z_h) - y_h)
    y_new = y + gamma * (sum_blocks(Ax_h) - z_h)
    return _advance(state, x_new, z_new, y_new, x_h, z_h, y_h)


def eg_blockwise_step(state, problem, gamma, ledger=None):
    """ExtraGradient on the per-block constraints ``A_i x_i = z_i``.

    Each client owns a dual ``y_i`` and slack ``z_i``; the slacks share the
    loss gradient at ``sum_j z_j``. The returned ``z`` and ``y`` are the
    sum of slacks and the mean of duals.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    x, zb, yb = state.x, state.z_blocks, state.y_blocks

    # only the slack sum travels to client 0 and the loss gradient back
    L.up(n * s)
    L.down(s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    g = loss.grad(sum_blocks(zb))
    x_h = [xi - gamma * (Ai.T @ yi + reg.grad(xi)) for Ai, xi, yi in zip(A, x, yb)]
    z_h = [zi - gamma * (g - yi) for zi, yi in zip(zb, yb)]
    y_h = [yi + gamma * (Ai @ xi - zi) for Ai, xi, yi, zi in zip(A, x, yb, zb)]

    L.up(n * s)
    L.down(s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    g_h = loss.grad(sum_blocks(z_h))
    x_new = [xi - gamma * (Ai.T @ yi + reg.grad(xh)) for Ai, xi, yi, xh in zip(A, x, y_h, x_h)]
    z_new = [zi - gamma * (g_h - yi) for zi, yi in zip(zb, y_h)]
    y_new = [yi + gamma * (Ai @ xh - zh) for Ai, xh, yi, zh in zip(A, x_h, yb, z_h)]

    new = _advance(state, x_new, sum_blocks(z_new), sum_blocks(y_new) / n,
                   x_h, sum_blocks(z_h), sum_blocks(y_h) / n)
    new.z_blocks, new.y_blocks = z_new, y_new
    return new


def eg_augmented_step(state, problem, gamma, rho, ledger=None):
    """ExtraGradient on the augmented Lagrangian with penalty `rho`.

    Client 0 also broadcasts the residual ``sum A_i x_i - z`` at the
    current point; the full step reuses that same residual.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    x, z, y = state.x, state.z, state.y

    Ax = [Ai @ xi for Ai, xi in zip(A, x)]
    L.up(n * s)
    Ax_sum = sum_blocks(Ax)
    res = Ax_sum - z
    L.down(2 * s)
    L.compute(3 * _matvec_cost(problem))
    L.sync()
    At_res = [Ai.T @ res for Ai in A]
    x_h = [xi - gamma * (Ai.T @ y + reg.grad(xi) + rho * atr)
           for Ai, xi, atr in zip(A, x, At_res)]
    z_h = z - gamma * (loss.grad(z) - y + rho * (z - Ax_sum))
    y_h = y + gamma * (Ax_sum - z)

    Ax_h = [Ai @ xi for Ai, xi in zip(A, x_h)]
    L.up(n * s)
    L.down(s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_new = [xi - gamma * (Ai.T @ y_h + reg.grad(xh) + rho * atr)
             for Ai, xi, xh, atr in zip(A, x, x_h, At_res)]
    z_new = z - gamma * (loss.grad(z_h) - y_h + rho * (z - Ax_sum))
    y_new = y + gamma * (sum_blocks(Ax_h) - z_h)
    return _advance(state, x_new, z_new, y_new, x_h, z_h, y_h)


def eg_dual_step(state, problem, gamma, ledger=None):
    """ExtraGradient on ``r(x) + y^T A x - l*(y)`` (the slack is eliminated).

    The stored ``z`` is the recovered ``sum A_i x_i``.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    x, y = state.x, state.y

    L.down(s)
    Ax = [Ai @ xi for Ai, xi in zip(A, x)]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_h = [xi - gamma * (Ai.T @ y + reg.grad(xi)) for Ai, xi in zip(A, x)]
    y_h = y - gamma * (loss.conjugate_grad(y) - sum_blocks(Ax))

    L.down(s)
    Ax_h = [Ai @ xi for Ai, xi in zip(A, x_h)]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_new = [xi - gamma * (Ai.T @ y_h + reg.grad(xh)) for Ai, xi, xh in zip(A, x, x_h)]
    y_new = y - gamma * (loss.conjugate_grad(y_h) - sum_blocks(Ax_h))
    z_new = sum_blocks([Ai @ xi for Ai, xi in zip(A, x_new)])
    return _advance(state, x_new, z_new, y_new, x_h, sum_blocks(Ax_h), y_h)


def eg_nonconvex_step(state, problem, gamma, gamma_w=None, ledger=None):
    """ExtraGradient for the scalar-gain model ``g_i = w_i * A_i``.

    Client i also updates its gain ``w_i`` by the partial derivative of the
    coupling term, ``y^T A_i x_i``.
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    gw = gamma if gamma_w is None else gamma_w
    x, z, y, m = state.x, state.z, state.y, state.model_w

    L.down(s)
    Ax = [Ai @ xi for Ai, xi in zip(A, x)]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_h = [xi - gamma * ((Ai.T @ y) * mi + reg.grad(xi)) for Ai, xi, mi in zip(A, x, m)]
    m_h = np.array([mi - gw * float(y @ axi) for mi, axi in zip(m, Ax)])
    z_h = z - gamma * (loss.grad(z) - y)
    y_h = y + gamma * (sum_blocks([axi * mi for axi, mi in zip(Ax, m)]) - z)

    L.down(s)
    Ax_h = [Ai @ xi for Ai, xi in zip(A, x_h)]
    L.up(n * s)
    L.compute(2 * _matvec_cost(problem))
    L.sync()
    x_new = [xi - gamma * ((Ai.T @ y_h) * mi + reg.grad(xh))
             for Ai, xi, xh, mi in zip(A, x, x_h, m_h)]
    m_new = np.array([mi - gw * float(y_h @ axi) for mi, axi in zip(m, Ax_h)])
    z_new = z - gamma * (loss.grad(z_h) - y_h)
    y_new = y + gamma * (sum_blocks([axi * mi for axi, mi in zip(Ax_h, m_h)]) - z_h)
    new = _advance(state, x_new, z_new, y_new, x_h, z_h, y_h)
    new.model_w = m_new
    new.extra["model_w_half"] = m_h
    return new


def model_residual(problem, state):
    """``||sum_i w_i A_i x_i - z||`` for the scalar-gain model."""
    Gx = sum_blocks([(Ai @ xi) * mi for Ai, xi, mi in zip(problem.blocks, state.x, state.model_w)])
    return float(np.linalg.norm(Gx - state.z))
