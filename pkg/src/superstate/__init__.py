"""Finite-window policy learning in tabular POMDPs through superstate MDPs."""

from .belief import belief_update, contraction_audit, tv_distance, window_belief
from .bounds import theoretical_sample_size
from .errors import (
    CapacityError,
    FilteringError,
    NumericError,
    ParameterError,
    SuperstateError,
    UnreachableWindowError,
    ValidationError,
)
from .estimation import CountsModel, count_windows, estimation_error, to_model
from .exact import SuperstateModel, build_exact, lemma1_gap
from .experiment import ExperimentConfig, figure1_sweep, run_algorithm1
from .planning import (
    QTable,
    greedy,
    optimal_superstate_value,
    pomdp_policy_value,
    superstate_policy_value,
    value_iteration,
)
from .pomdp import (
    StabilityReport,
    TabularPomdp,
    Trajectory,
    load_pomdp,
    probe_env,
    random_pomdp,
    sample_trajectory,
    validate,
)
from .windows import WindowIndex, WindowPolicy, shift_append, window_at

__version__ = "0.1.0"
