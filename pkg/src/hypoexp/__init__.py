"""CDF of sums of independent exponentials: exact routes and a bounded-relative-error estimator."""

from .core import (
    DuplicateRates,
    EmptyRates,
    HypoexpError,
    HypoexpProblem,
    InvalidOrder,
    NonFiniteInput,
    NonPositiveRate,
    NonPositiveThreshold,
    RateVector,
    erlang_cdf,
    exp_moment_integral,
    highprecision_hypoexp_cdf,
    highprecision_series_cdf,
    lower_incomplete_gamma,
    poisson_tail,
    stirling_upper_bound,
    validate_problem,
)
from .exact import (
    ExactResult,
    StabilityReport,
    Verdict,
    build_subgenerator,
    exact_cdf,
    expm_survival,
    matrix_exponential,
    ross_cdf,
)
from .importance import (
    AllSamplesRejected,
    EstimateResult,
    ISConfig,
    empirical_second_moment_ratio,
    is_estimate,
    re_bound,
    sample_weight,
    second_moment_ratio_bound,
)
from .bench import (
    ModelSpec,
    TrialSummary,
    builtin_models,
    crude_mc_estimate,
    reproduce_tables,
    run_trials,
)

__version__ = "0.1.0"
