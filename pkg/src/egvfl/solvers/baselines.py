"""Classical baselines: gradient descent, Nesterov momentum, sharing-form
ADMM and gradient ascent on the dual."""

import copy

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import DegenerateProblem
from ..problem import sum_blocks
from .extragradient import _ledger


def _primal_grad(problem, x, L):
    """Return ``(A x, grad l(A x), [grad_i f(x)])`` and charge the exchange."""
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    Ax = sum_blocks([Ai @ xi for Ai, xi in zip(A, x)])
    L.up(n * s)
    g = loss.grad(Ax)
    L.down(s)
    L.compute(2 * s * problem.d)
    L.sync()
    return Ax, g, [Ai.T @ g + reg.grad(xi) for Ai, xi in zip(A, x)]


def _set_primal(state, x, problem, Ax=None):
    new = copy.copy(state)
    new.extra = dict(state.extra)
    new.x = x
    new.z = Ax if Ax is not None else sum_blocks([Ai @ xi for Ai, xi in zip(problem.blocks, x)])
    new.y = problem.loss.grad(new.z)
    new.x_half, new.z_half, new.y_half = new.x, new.z, new.y
    new.k = state.k + 1
    return new


def gd_step(state, problem, gamma, ledger=None):
    """``x <- x - gamma * grad f(x)``; ``z = A x`` and ``y = grad l(z)``."""
    L = _ledger(ledger)
    _, _, grads = _primal_grad(problem, state.x, L)
    x_new = [xi - gamma * gi for xi, gi in zip(state.x, grads)]
    return _set_primal(state, x_new, problem)


def nesterov_momentum(L_smooth, mu):
    """``(sqrt(L) - sqrt(mu)) / (sqrt(L) + sqrt(mu))``."""
    rl, rm = np.sqrt(L_smooth), np.sqrt(max(mu, 0.0))
    return float((rl - rm) / (rl + rm))


def nesterov_step(state, problem, gamma, momentum, ledger=None):
    """Constant-momentum accelerated gradient.

    ``v = x + momentum * (x - x_prev)``, ``x_next = v - gamma * grad f(v)``.
    The previous iterate lives in ``state.extra["x_prev"]``.
    """
    L = _ledger(ledger)
    x = state.x
    x_prev = state.extra.get("x_prev", x)
    v = [xi + momentum * (xi - xp) for xi, xp in zip(x, x_prev)]
    _, _, grads = _primal_grad(problem, v, L)
    x_new = [vi - gamma * gi for vi, gi in zip(v, grads)]
    new = _set_primal(state, x_new, problem)
    new.extra["x_prev"] = x
    return new


class _AdmmCache:
    """Per-problem Cholesky factors of ``2 lam I + rho A_i^T A_i``."""

    def __init__(self, problem, rho):
        self.rho = rho
        lam = problem.reg.lam if problem.reg.kind == "ridge" else 0.0
        self.factors = []
        for Ai in problem.blocks:
            M = rho * (Ai.T @ Ai) + 2.0 * lam * np.eye(Ai.shape[1])
            try:
                self.factors.append(cho_factor(M))
            except np.linalg.LinAlgError:
                raise DegenerateProblem(
                    "ADMM x-subproblem is singular; use a ridge weight > 0") from None


def _accelerated_prox_grad(grad, prox_fn, L_smooth, mu, x0, tol, max_iter=100_000):
    """FISTA / constant-momentum proximal gradient for an inner subproblem.

    Stops when the step length drops below ``tol * (1 + ||x||)``.
    Returns the solution and the number of gradient evaluations.
    """
    step = 1.0 / L_smooth
    if mu > 0:
        beta = nesterov_momentum(L_smooth, mu)
    x_prev = x0
    x = x0
    t = 1.0
    for it in range(1, max_iter + 1):
        if mu > 0:
            mom = beta
        else:
            t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            mom = (t - 1) / t_next
            t = t_next
        v = x + mom * (x - x_prev)
        x_next = prox_fn(v - step * grad(v), step)
        if np.linalg.norm(x_next - x) <= tol * (1.0 + np.linalg.norm(x_next)):
            return x_next, it
        x_prev, x = x, x_next
    return x, max_iter


def admm_step(state, problem, rho, inner="closed_form", inner_tol=1e-10, ledger=None):
    """One sharing-form ADMM iteration in unscaled variables.

    Client i minimizes ``r_i(x_i) + rho/2 ||A_i x_i - c_i||^2`` with
    ``c_i = A_i x_i^k - v + z/n - y/rho`` and ``v`` the mean of the
    products ``A_i x_i^k``. Client 0 then sets
    ``z = prox_{(n/rho) l}(n (y/rho + v_new))`` and
    ``y <- y + rho (v_new - z/n)``.

    ``inner="closed_form"`` solves the ridge subproblem with cached
    Cholesky factors; ``"accelerated"`` runs an inner first-order loop to
    tolerance `inner_tol` (needed for l1).
    """
    L = _ledger(ledger)
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    n, s = problem.n, problem.s
    x, z, y = state.x, state.z, state.y

    Ax = state.extra.get("Ax")
    if Ax is None:
        Ax = [Ai @ xi for Ai, xi in zip(A, x)]
        L.compute(s * problem.d)
    v = sum_blocks(Ax) / n
    shift = v - z / n + y / rho
    L.down(s)
    L.sync()

    x_new = []
    if inner == "closed_form":
        if reg.kind == "l1":
            raise DegenerateProblem("closed-form ADMM needs a smooth ridge regularizer")
        cache = state.extra.get("admm_cache")
        if cache is None or cache.rho != rho:
            cache = _AdmmCache(problem, rho)
        for Ai, axi, fac in zip(A, Ax, cache.factors):
            ci = axi - shift
            x_new.append(cho_solve(fac, rho * (Ai.T @ ci)))
            L.compute(2 * s * Ai.shape[1] + Ai.shape[1] ** 2)
    else:
        cache = state.extra.get("admm_cache")
        for Ai, axi, xi in zip(A, Ax, x):
            ci = axi - shift
            lip = rho * np.linalg.norm(Ai, 2) ** 2 + (2 * reg.lam if reg.kind == "ridge" else 0.0)
            mu = 2 * reg.lam if reg.kind == "ridge" else 0.0
            if reg.kind == "ridge":
                def grad(u, Ai=Ai, ci=ci):
                    return rho * (Ai.T @ (Ai @ u - ci)) + 2 * reg.lam * u

                def prox_fn(u, t):
                    return u
            else:
                def grad(u, Ai=Ai, ci=ci):
                    return rho * (Ai.T @ (Ai @ u - ci))

                prox_fn = reg.prox
            sol, its = _accelerated_prox_grad(grad, prox_fn, lip, mu, xi, inner_tol)
            x_new.append(sol)
            L.compute(its * 2 * s * Ai.shape[1])

    Ax_new = [Ai @ xi for Ai, xi in zip(A, x_new)]
    L.up(n * s)
    L.compute(s * problem.d)
    v_new = sum_blocks(Ax_new) / n
    z_new = loss.prox(n * (y / rho + v_new), n / rho)
    y_new = y + rho * (v_new - z_new / n)

    new = copy.copy(state)
    new.extra = dict(state.extra)
    new.extra["Ax"] = Ax_new
    if cache is not None:
        new.extra["admm_cache"] = cache
    new.x, new.z, new.y = x_new, z_new, y_new
    new.x_half, new.z_half, new.y_half = x_new, z_new, y_new
    new.k = state.k + 1
    return new


def dual_objective(problem, y):
    """``D(y) = -l*(y) - sum_i r_i*(-A_i^T y)`` (ridge only)."""
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    return -loss.conjugate(y) - sum(reg.conjugate(-(Ai.T @ y)) for Ai in A)


def dual_gradient(problem, y):
    """Gradient of `dual_objective`: ``-grad l*(y) + sum_i A_i grad r_i*(-A_i^T y)``."""
    A, loss, reg = problem.blocks, problem.loss, problem.reg
    return -loss.conjugate_grad(y) + sum_blocks(
        [Ai @ reg.conjugate_grad(-(Ai.T @ y)) for Ai in A])


def dual_gd_step(state, problem, gamma, ledger=None):
    """Gradient ascent on the dual; primal recovery ``x_i = -A_i^T y / (2 lam)``."""
    reg = problem.reg
    if reg.kind != "ridge" or reg.lam <= 0:
        raise DegenerateProblem("dual gradient ascent needs a ridge weight > 0")
    L = _ledger(ledger)
    A = problem.blocks
    n, s = problem.n, problem.s
    y = state.y

    L.down(s)
    x = [reg.conjugate_grad(-(Ai.T @ y)) for Ai in A]
    Ax = sum_blocks([Ai @ xi for Ai, xi in zip(A, x)])
    L.up(n * s)
    L.compute(2 * s * problem.d)
    L.sync()
    y_new = y + gamma * (-problem.loss.conjugate_grad(y) + Ax)

    x_new = [reg.conjugate_grad(-(Ai.T @ y_new)) for Ai in A]
    new = copy.copy(state)
    new.extra = dict(state.extra)
    new.x = x_new
    new.z = sum_blocks([Ai @ xi for Ai, xi in zip(A, x_new)])
    new.y = y_new
    new.x_half, new.z_half, new.y_half = new.x, new.z, new.y
    new.k = state.k + 1
    return new
