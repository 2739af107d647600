"""Loss and regularizer catalogue, problem assembly, the beta rescaling and
step-size rules for every solver variant."""

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateProblem,
    DimensionError,
    MissingConstant,
    UnsupportedConjugate,
    UnsupportedProx,
)
from .linalg import block_lambda_bound, lambda_max_gram


class NotSmooth(UnsupportedProx):
    """Raised when a gradient is requested from a non-smooth term."""


@dataclass(frozen=True)
class QuadraticLoss:
    """``l(z) = 0.5 * ||z / scale - b||^2``.

    ``scale`` is the beta factor of the rescaled formulation; ``scale=1``
    is the plain least-squares loss with smoothness constant 1.
    """

    b: np.ndarray
    scale: float = 1.0
    kind: str = field(default="quadratic", init=False)

    def _check(self, z):
        if z.shape != self.b.shape:
            raise DimensionError(f"loss expects length {self.b.shape[0]}, got {z.shape}")

    def value(self, z):
        self._check(z)
        r = z / self.scale - self.b
        return 0.5 * float(r @ r)

    def grad(self, z):
        self._check(z)
        return (z / self.scale - self.b) / self.scale

    @property
    def smoothness(self):
        return 1.0 / self.scale ** 2

    def prox(self, v, gamma):
        """argmin_z gamma*l(z) + 0.5*||v - z||^2."""
        self._check(v)
        c = gamma / self.scale ** 2
        return (v + (gamma / self.scale) * self.b) / (1.0 + c)

    def conjugate(self, y):
        self._check(y)
        return 0.5 * self.scale ** 2 * float(y @ y) + self.scale * float(self.b @ y)

    def conjugate_grad(self, y):
        self._check(y)
        return self.scale ** 2 * y + self.scale * self.b

    @property
    def conjugate_smoothness(self):
        return self.scale ** 2


@dataclass(frozen=True)
class Regularizer:
    """Separable regularizer: ridge ``lam*||x||^2``, l1 ``lam*||x||_1`` or none.

    ``lr_convention`` selects the smoothness constant reported for ridge:
    ``"2lambda"`` (the gradient Lipschitz constant) or ``"lambda"``.
    """

    kind: str = "ridge"
    lam: float = 0.0
    lr_convention: str = "2lambda"

    def __post_init__(self):
        if self.kind not in ("ridge", "l1", "none"):
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.lr_convention not in ("2lambda", "lambda"):
            raise ValueError(f"unknown lr_convention {self.lr_convention!r}")

    def value(self, x):
        if self.kind == "ridge":
            return self.lam * float(x @ x)
        if self.kind == "l1":
            return self.lam * float(np.sum(np.abs(x)))
        return 0.0

    def grad(self, x):
        if self.kind == "ridge":
            return 2.0 * self.lam * x
        if self.kind == "none":
            return np.zeros_like(x)
        raise NotSmooth("the l1 regularizer has no gradient; use a prox-based solver")

    @property
    def smoothness(self):
        if self.kind == "ridge":
            return 2.0 * self.lam if self.lr_convention == "2lambda" else self.lam
        if self.kind == "none":
            return 0.0
        return None

    @property
    def strong_convexity(self):
        """Modulus used for momentum tuning (same convention as smoothness)."""
        if self.kind == "ridge":
            return self.smoothness
        return 0.0

    def prox(self, v, gamma):
        if self.kind == "ridge":
            return v / (1.0 + 2.0 * gamma * self.lam)
        if self.kind == "l1":
            t = gamma * self.lam
            return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
        return v.copy()

    def conjugate(self, u):
        if self.kind != "ridge" or self.lam <= 0:
            raise UnsupportedConjugate("conjugate available for ridge with lam > 0 only")
        return float(u @ u) / (4.0 * self.lam)

    def conjugate_grad(self, u):
        if self.kind != "ridge" or self.lam <= 0:
            raise UnsupportedConjugate("conjugate available for ridge with lam > 0 only")
        return u / (2.0 * self.lam)


def loss_grad(loss, z):
    return loss.grad(z)


def prox(term, v, gamma):
    """Proximal map ``argmin_y gamma*term(y) + 0.5*||v - y||^2``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    fn = getattr(term, "prox", None)
    if fn is None:
        raise UnsupportedProx(f"no prox for {type(term).__name__}")
    return fn(v, gamma)


def loss_conjugate_grad(loss, y):
    if getattr(loss, "kind", None) != "quadratic":
        raise UnsupportedConjugate("conjugate gradient implemented for the quadratic loss")
    return loss.conjugate_grad(y)


def reg_conjugate_grad(reg, u):
    return reg.conjugate_grad(u)


@dataclass(eq=False)
class ProblemSpec:
    """Regularized least squares over a vertical split.

    The solvers see the rescaled data ``beta * A_i`` and the loss
    ``l(z / beta)``; the objective ``f(x)`` is the same for every beta.
    """

    dataset: object
    loss: QuadraticLoss
    reg: Regularizer
    beta: float = 1.0
    lambda_max_mode: str = "exact"
    block_form: str = "max"

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.lambda_max_mode not in ("exact", "block_bound"):
            raise ValueError(f"unknown lambda_max_mode {self.lambda_max_mode!r}")
        if self.loss.scale != self.beta:
            self.loss = replace(self.loss, scale=self.beta)

    @property
    def n(self):
        return self.dataset.n_clients

    @property
    def s(self):
        return self.dataset.sample_count

    @property
    def d(self):
        return self.dataset.total_features

    @cached_property
    def blocks(self):
        if self.beta == 1.0:
            return list(self.dataset.blocks)
        return [self.beta * B for B in self.dataset.blocks]

    @cached_property
    def _raw_lambda_exact(self):
        return lambda_max_gram(self.dataset.full_matrix())

    @cached_property
    def _raw_block_lambdas(self):
        return [lambda_max_gram(B) for B in self.dataset.blocks]

    @property
    def lambda_max_exact(self):
        """lambda_max(A~^T A~) of the rescaled data, by power iteration."""
        return self.beta ** 2 * self._raw_lambda_exact

    @property
    def lambda_max_blocks(self):
        """max_i lambda_max(A~_i^T A~_i)."""
        return self.beta ** 2 * max(self._raw_block_lambdas)

    @property
    def lambda_max(self):
        """The spectral constant fed to the step rules (exact or block bound)."""
        if self.lambda_max_mode == "exact":
            return self.lambda_max_exact
        n = self.n
        lams = self._raw_block_lambdas
        bound = n * max(lams) if self.block_form == "max" else n * sum(lams)
        return self.beta ** 2 * bound

    def objective(self, x_blocks):
        """f(x) = l(A x, b) + r(x), invariant under the beta rescaling."""
        z = sum_blocks([B @ x for B, x in zip(self.blocks, x_blocks)])
        return self.loss.value(z) + sum(self.reg.value(x) for x in x_blocks)

    def constants(self):
        return {
            "lambda_max": self.lambda_max,
            "lambda_max_blocks": self.lambda_max_blocks,
            "L_l": self.loss.smoothness,
            "L_lstar": self.loss.conjugate_smoothness,
            "L_r": self.reg.smoothness,
            "mu_r": self.reg.strong_convexity,
            "lam": self.reg.lam,
            "n": self.n,
            "s": self.s,
            "d": self.d,
        }


def sum_blocks(vectors):
    """Sum vectors in fixed client order (bitwise-reproducible reduction)."""
    out = vectors[0].copy()
    for v in vectors[1:]:
        out += v
    return out


def default_lambda(dataset, factor=1e-3):
    """lambda = lambda_max(A A^T) * factor (default lambda_max / 10^3)."""
    return factor * lambda_max_gram(dataset.full_matrix())


def make_problem(dataset, reg="ridge", lam="lmax_over_1e3", beta_trick=False,
                 lambda_max_mode="exact", lr_convention="2lambda", block_form="max"):
    """Assemble a least-squares problem over `dataset`.

    `lam` is a float or the rule name ``"lmax_over_1e3"``.
    """
    if isinstance(lam, str):
        if lam != "lmax_over_1e3":
            raise ValueError(f"unknown lambda rule {lam!r}")
        lam = default_lambda(dataset)
    spec = ProblemSpec(
        dataset=dataset,
        loss=QuadraticLoss(dataset.labels),
        reg=Regularizer(reg, float(lam), lr_convention),
        lambda_max_mode=lambda_max_mode,
        block_form=block_form,
    )
    if beta_trick:
        spec = apply_beta_trick(spec)
    return spec


def beta_for(L_l, lambda_max):
    """beta = L_l^(1/3) / lambda_max^(1/6), balancing L_l~ and sqrt(lambda_max~)."""
    if lambda_max <= 0:
        raise DegenerateProblem("lambda_max is zero; the beta rescaling is undefined")
    return L_l ** (1.0 / 3.0) / lambda_max ** (1.0 / 6.0)


def apply_beta_trick(spec):
    """Return a copy of `spec` rescaled so that L_l~ equals sqrt(lambda_max~).

    The factor is computed from the constants `spec` currently exposes, so
    the call composes with an existing rescaling.
    """
    beta = beta_for(spec.loss.smoothness, spec.lambda_max)
    new = ProblemSpec(
        dataset=spec.dataset,
        loss=spec.loss,
        reg=spec.reg,
        beta=spec.beta * beta,
        lambda_max_mode=spec.lambda_max_mode,
        block_form=spec.block_form,
    )
    # reuse the cached spectra; they do not depend on beta
    for key in ("_raw_lambda_exact", "_raw_block_lambdas"):
        if key in spec.__dict__:
            new.__dict__[key] = spec.__dict__[key]
    return new


@dataclass(frozen=True)
class StepRule:
    variant: str
    gamma: float
    constants: dict


def _inv(x):
    return math.inf if x == 0 else 1.0 / x


def _need(constants, *keys):
    out = []
    for k in keys:
        v = constants.get(k)
        if v is None:
            raise MissingConstant(k)
        out.append(v)
    return out


def _basic(c):
    lam, L_l, L_r = _need(c, "lambda_max", "L_l", "L_r")
    return 0.5 * min(1.0, _inv(math.sqrt(lam)), _inv(L_r), _inv(L_l))


def _prox(c):
    (lam,) = _need(c, "lambda_max")
    return min(1.0, _inv(math.sqrt(lam))) / math.sqrt(2.0)


def _seed_indicator(c):
    return 0.0 if c.get("shared_seed", True) else 1.0


def _compress_unbiased(c):
    lam, lam_b, L_l, L_r, p, omega = _need(
        c, "lambda_max", "lambda_max_blocks", "L_l", "L_r", "p", "omega")
    ind = _seed_indicator(c)
    return 0.25 * min(
        1.0, _inv(L_r), _inv(L_l),
        math.sqrt(p * _inv(omega * (lam + ind * lam_b))),
        math.sqrt(p * _inv(omega * lam)),
    )


def _compress_biased(c):
    lam, lam_b, L_l, L_r, p, delta, n = _need(
        c, "lambda_max", "lambda_max_blocks", "L_l", "L_r", "p", "delta", "n")
    omega = c.get("omega", delta)
    return 0.25 * min(
        1.0, _inv(L_r), _inv(L_l),
        math.sqrt(p * _inv(delta ** 2 * (lam + n * lam_b))),
        math.sqrt(p * _inv(omega * lam)),
    )


def _partial(c):
    lam, lam_b, L_l, L_r, p, n = _need(
        c, "lambda_max", "lambda_max_blocks", "L_l", "L_r", "p", "n")
    return 0.25 * min(1.0, _inv(L_r), _inv(L_l), math.sqrt(p * _inv(lam + n * lam_b)))


def _coord(c):
    lam, lam_b, L_l, L_r, p, s, d = _need(
        c, "lambda_max", "lambda_max_blocks", "L_l", "L_r", "p", "s", "d")
    ind = _seed_indicator(c)
    return 0.25 * min(
        1.0, _inv(L_r), _inv(L_l),
        math.sqrt(p * _inv(s * (lam + ind * lam_b))),
        math.sqrt(p * _inv(d * lam_b)),
    )


def _noise(c):
    lam, L_l, L_r, n, sigma = _need(c, "lambda_max", "L_l", "L_r", "n", "sigma")
    terms = [0.5, _inv(math.sqrt(8.0 * lam)), 0.5 * _inv(L_r), 0.5 * _inv(L_l)]
    if sigma > 0:
        radius, K = _need(c, "radius", "K")
        terms.append(math.sqrt(radius * _inv(8.0 * (lam + n) * sigma ** 2 * max(K, 1))))
    return min(terms)


def _blockwise(c):
    lam_b, L_l, L_r, n = _need(c, "lambda_max_blocks", "L_l", "L_r", "n")
    return 0.5 * min(1.0, _inv(math.sqrt(lam_b)), _inv(L_r), _inv(n * L_l))


def _augmented(c):
    lam, L_l, L_r, rho = _need(c, "lambda_max", "L_l", "L_r", "rho")
    return 0.25 * min(
        1.0, _inv(rho), _inv(math.sqrt(lam)), _inv(math.sqrt(rho * lam)),
        _inv(rho * lam), _inv(L_r), _inv(L_l),
    )


def _dual(c):
    lam, L_lstar, L_r = _need(c, "lambda_max", "L_lstar", "L_r")
    return 0.5 * min(1.0, _inv(math.sqrt(lam)), _inv(L_r), _inv(L_lstar))


def _gd(c):
    lam, L_l, L_r = _need(c, "lambda_max", "L_l", "L_r")
    return _inv(lam * L_l + L_r)


def _dual_gd(c):
    lam, L_lstar, reg_lam = _need(c, "lambda_max", "L_lstar", "lam")
    if reg_lam <= 0:
        raise DegenerateProblem("dual gradient ascent needs a ridge weight > 0")
    return _inv(L_lstar + lam / (2.0 * reg_lam))


def _admm(c):
    (lam,) = _need(c, "lambda_max")
    return _inv(math.sqrt(lam))


_RULES = {
    "eg_basic": _basic,
    "eg_encrypted": _basic,
    "eg_nonconvex": _basic,
    "eg_prox": _prox,
    "eg_compress_unbiased": _compress_unbiased,
    "eg_compress_biased": _compress_biased,
    "eg_partial": _partial,
    "eg_coord": _coord,
    "eg_noise": _noise,
    "eg_blockwise": _blockwise,
    "eg_augmented": _augmented,
    "eg_dual": _dual,
    "gd": _gd,
    "nesterov": _gd,
    "dual_gd": _dual_gd,
    "admm": _admm,
}


def step_size(variant, constants):
    """Theory-driven step size for `variant`.

    For ``admm`` the returned value is the penalty parameter
    ``1/sqrt(lambda_max)``. Infinite terms (a zero constant in a
    denominator) drop out of the minimum.

    Raises
    ------
    MissingConstant
        If the formula references a constant absent from `constants`.
    """
    try:
        rule = _RULES[variant]
    except KeyError:
        raise ValueError(f"no step rule for variant {variant!r}") from None
    gamma = rule(constants)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise DegenerateProblem(f"step rule for {variant} produced {gamma}")
    return StepRule(variant, gamma, dict(constants))
