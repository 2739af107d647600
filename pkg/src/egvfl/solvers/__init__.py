"""ExtraGradient family for split-feature problems, plus classical baselines."""

from .baselines import (
    admm_step, dual_gd_step, dual_gradient, dual_objective, gd_step, nesterov_momentum,
    nesterov_step,
)
from .extragradient import (
    eg_augmented_step, eg_basic_step, eg_blockwise_step, eg_dual_step, eg_encrypted_step,
    eg_noise_step, eg_nonconvex_step, eg_prox_step, model_residual,
)
from .runner import make_stepper, relative_error, resolve_gamma, rule_constants, run
from .state import (
    DETERMINISTIC, VARIANTS, IterateState, SolverConfig, check_finite, init_state, state_at,
)
from .stochastic import (
    eg_compress_biased_step, eg_compress_unbiased_step, eg_coord_step, eg_partial_step,
)
