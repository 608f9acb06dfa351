"""Large deviations of compound Poisson processes.

Rate functions for the time average S_t of a compound Poisson process, the
matching i.i.d. rate, exponentially tilted simulation, and Monte Carlo and
importance-sampling estimates of rare-event probabilities.
"""

# the cumulant function stays in its submodule so the name `cumulant` keeps referring to the module
from .cumulant import CompoundPoissonModel, cumulant_derivative, discrete_logmgf, laplace_transform
from .errors import CramerError, DivergenceError, NumericError, UsageError
from .estimate import (
    EstimateResult,
    EventWindow,
    Method,
    TailEvent,
    chernoff_tail_bound,
    decay_rate_curve,
    is_probability,
    mc_probability,
    zero_probability,
)
from .marks import (
    Empirical,
    Exponential,
    Gamma,
    MarkDistribution,
    PointMass,
    ZeroInflated,
    exponential_moment,
    parse_dist,
    sample_mark,
    tilt,
)
from .rate import (
    Branch,
    RateFunctionResult,
    SolverConfig,
    TiltBoundary,
    brute_force_rate,
    closed_form_rate_exp_continuous,
    closed_form_rate_exp_discrete,
    rate_function,
    rate_function_discrete,
    solve_tilt,
)
from .simulate import (
    PathBatch,
    PathSample,
    log_likelihood_ratio,
    simulate_path,
    simulate_paths,
    simulate_tilted_path,
    simulate_tilted_paths,
    tilted_model,
)

__version__ = "0.1.0"
