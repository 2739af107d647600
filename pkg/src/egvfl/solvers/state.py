"""Iterate state shared by all solver variants, plus the solver config."""

from dataclasses import dataclass, field

import numpy as np

from ..comm import Compressor, EncryptionScheme, ErrorState, NoiseSpec
from ..errors import ConfigError, DivergenceError
from ..problem import sum_blocks

VARIANTS = (
    "eg_basic", "eg_prox", "eg_compress_unbiased", "eg_compress_biased",
    "eg_partial", "eg_coord", "eg_noise", "eg_encrypted", "eg_blockwise",
    "eg_augmented", "eg_dual", "eg_nonconvex", "gd", "nesterov", "admm", "dual_gd",
)

DETERMINISTIC = (
    "eg_basic", "eg_prox", "eg_encrypted", "eg_blockwise", "eg_augmented",
    "eg_dual", "eg_nonconvex", "gd", "nesterov", "admm", "dual_gd",
)

DIVERGENCE_NORM = 1e12


@dataclass
class IterateState:
    """Primal blocks ``x``, slack ``z``, dual ``y`` and method-specific extras.

    ``w``/``u`` are the reference points of the variance-reduced variants
    and ``Aw``/``Atu`` cache ``A_i w_i`` and ``A_i^T u``. The ``*_half``
    fields hold the most recent half-step iterates, which feed the running
    averages. Blockwise runs keep per-client ``z_blocks``/``y_blocks``;
    ``z`` and ``y`` then hold their sum and mean.
    """

    x: list
    z: np.ndarray
    y: np.ndarray
    w: list
    u: np.ndarray
    Aw: list
    Atu: list
    errors: ErrorState
    k: int = 0
    x_half: list = None
    z_half: np.ndarray = None
    y_half: np.ndarray = None
    z_blocks: list = None
    y_blocks: list = None
    model_w: np.ndarray = None
    extra: dict = field(default_factory=dict)
    x_avg: list = None
    z_avg: np.ndarray = None
    y_avg: np.ndarray = None
    n_avg: int = 0

    def copy(self):
        def cp(v):
            if v is None:
                return None
            if isinstance(v, list):
                return [a.copy() for a in v]
            return v.copy()

        return IterateState(
            x=cp(self.x), z=cp(self.z), y=cp(self.y), w=cp(self.w), u=cp(self.u),
            Aw=cp(self.Aw), Atu=cp(self.Atu), errors=self.errors.copy(), k=self.k,
            x_half=cp(self.x_half), z_half=cp(self.z_half), y_half=cp(self.y_half),
            z_blocks=cp(self.z_blocks), y_blocks=cp(self.y_blocks),
            model_w=cp(self.model_w),
            extra={key: cp(v) for key, v in self.extra.items()},
            x_avg=cp(self.x_avg), z_avg=cp(self.z_avg), y_avg=cp(self.y_avg),
            n_avg=self.n_avg,
        )

    def vectors(self):
        """All iterate arrays that must stay finite and bounded."""
        out = list(self.x) + [self.z, self.y]
        for name in ("z_blocks", "y_blocks"):
            v = getattr(self, name)
            if v is not None:
                out.extend(v)
        if self.model_w is not None:
            out.append(self.model_w)
        return out

    def record_average(self):
        """Fold the latest half-step iterates into the running means."""
        xh = self.x_half if self.x_half is not None else self.x
        zh = self.z_half if self.z_half is not None else self.z
        yh = self.y_half if self.y_half is not None else self.y
        m = self.n_avg
        if m == 0:
            self.x_avg = [v.copy() for v in xh]
            self.z_avg = zh.copy()
            self.y_avg = yh.copy()
        else:
            t = 1.0 / (m + 1)
            self.x_avg = [a + t * (v - a) for a, v in zip(self.x_avg, xh)]
            self.z_avg = self.z_avg + t * (zh - self.z_avg)
            self.y_avg = self.y_avg + t * (yh - self.y_avg)
        self.n_avg = m + 1


def init_state(problem, variant="eg_basic"):
    """Zero iterates with ``w = x``, ``u = y`` and zero error vectors."""
    n, s = problem.n, problem.s
    x = [np.zeros(d) for d in problem.dataset.feature_counts]
    state = IterateState(
        x=x, z=np.zeros(s), y=np.zeros(s),
        w=[v.copy() for v in x], u=np.zeros(s),
        Aw=[np.zeros(s) for _ in range(n)], Atu=[v.copy() for v in x],
        errors=ErrorState.zeros(s, n),
    )
    if variant == "eg_blockwise":
        state.z_blocks = [np.zeros(s) for _ in range(n)]
        state.y_blocks = [np.zeros(s) for _ in range(n)]
    if variant == "eg_nonconvex":
        state.model_w = np.ones(n)
    return state


def state_at(problem, x_blocks, z, y, variant="eg_basic"):
    """State positioned at ``(x, z, y)`` with references set to match."""
    A = problem.blocks
    state = init_state(problem, variant)
    state.x = [np.array(v, dtype=float) for v in x_blocks]
    state.z = np.array(z, dtype=float)
    state.y = np.array(y, dtype=float)
    state.w = [v.copy() for v in state.x]
    state.u = state.y.copy()
    state.Aw = [Ai @ xi for Ai, xi in zip(A, state.x)]
    state.Atu = [Ai.T @ state.u for Ai in A]
    if variant == "eg_blockwise":
        # z_i = A_i x_i except the last block, which takes the remainder
        zb = [Ai @ xi for Ai, xi in zip(A[:-1], state.x[:-1])]
        last = state.z.copy() if not zb else state.z - sum_blocks(zb)
        state.z_blocks = zb + [last]
        state.y_blocks = [state.y.copy() for _ in range(problem.n)]
    if variant == "nesterov":
        state.extra["x_prev"] = [v.copy() for v in state.x]
    return state


def check_finite(state, iteration=None):
    for v in state.vectors():
        if not np.all(np.isfinite(v)):
            raise DivergenceError("non-finite iterate (step size too large?)", iteration)
        if np.linalg.norm(v) > DIVERGENCE_NORM:
            raise DivergenceError(
                f"iterate norm exceeded {DIVERGENCE_NORM:g} (step size too large?)", iteration)


@dataclass
class SolverConfig:
    """Everything needed to replay one solver run.

    ``gamma`` and ``rho`` accept ``"auto"``: gamma then comes from the
    variant's step rule and rho defaults to ``1/sqrt(lambda_max)``
    (augmented and ADMM). ``gamma_w`` is the model-weight step of
    ``eg_nonconvex`` (defaults to gamma). ``coords`` is the number of
    sampled coordinates per client in ``eg_coord``. ``radius`` is the
    squared solution-radius bound used by the noisy step rule.
    """

    variant: str = "eg_basic"
    gamma: object = "auto"
    p: float = 0.1
    rho: object = "auto"
    compressor: Compressor = field(default_factory=Compressor)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    scheme: EncryptionScheme = field(default_factory=EncryptionScheme)
    K: int = 1000
    master_seed: int = 1
    report_every: int = 10
    coords: int = 1
    gamma_w: object = None
    radius: float = 1.0
    admm_inner: str = "closed_form"
    inner_tol: float = 1e-10
    metric_iterate: str = "last"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown solver variant {self.variant!r}")
        if not 0.0 < self.p <= 1.0:
            raise ConfigError("p must lie in (0, 1]")
        if self.rho != "auto" and self.rho < 0:
            raise ConfigError("rho must be nonnegative")
        if self.gamma != "auto" and not self.gamma >= 0:
            raise ConfigError("gamma must be nonnegative or 'auto'")
        if self.K < 0:
            raise ConfigError("K must be nonnegative")
        if self.report_every < 1:
            raise ConfigError("report_every must be at least 1")
        if self.coords < 1:
            raise ConfigError("coords must be at least 1")
        if self.admm_inner not in ("closed_form", "accelerated"):
            raise ConfigError(f"unknown admm_inner {self.admm_inner!r}")
        if self.metric_iterate not in ("last", "average"):
            raise ConfigError(f"unknown metric_iterate {self.metric_iterate!r}")

    @property
    def tau(self):
        return 1.0 - self.p

    def to_dict(self):
        out = {}
        for key, v in self.__dict__.items():
            if hasattr(v, "__dataclass_fields__"):
                v = dict(v.__dict__)
            out[key] = v
        return out
