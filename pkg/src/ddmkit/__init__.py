"""ddmkit: three discrete diffusion models with exact kernels, exact
discrete-score oracles, Euler-type backward samplers, and a numerical
verification layer for their convergence theory."""

from .generators import BetaSchedule, Model, invariant_residual, validate_assumptions
from .kernels import (
    DiscreteDistribution,
    FactoredKernel,
    Kernel1D,
    alpha,
    forward_marginal,
    kernel_brw_1d,
    kernel_brw_matrix,
    kernel_masked_1d,
    kernel_product,
    kernel_rw_1d,
    kolmogorov_oracle,
)
from .metrics import (
    BoundReport,
    CheckRow,
    divergence,
    entropy_decay_check,
    fisher_bound_check,
    fisher_information,
    lsi_rate,
    moments,
    score_evolution_check,
    stationary_distribution,
    theorem_terms,
)
from .sampler import (
    ALGORITHM_LITERAL,
    SINGLE_CLOCK,
    PropagationResult,
    ResourceBudgetError,
    SamplerRun,
    TimeGrid,
    grid_adaptive,
    grid_uniform,
    init_distribution,
    propagate_exact,
    sample_backward,
    sample_terminal_ensemble,
)
from .scores import (
    ScoreError,
    ScoreOracle,
    backward_rates,
    entropic_loss,
    exact_score,
    hjb_residual,
    perturbed_score,
    score_via_conditional,
)
from .spaces import (
    Mask,
    Minus,
    Plus,
    Space,
    Unmask,
    apply_op,
    decode,
    encode,
    masked_sets,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
