"""Sparse polymatrix games: representation, equilibria, sampling, learning."""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    DegeneratePoaError,
    InvalidDistributionError,
    InvalidInputError,
    ModelUndefinedError,
    ParseError,
    PolymatrixError,
    ScheduleInfeasibleError,
)
from .games import (
    DEFAULT_ENUMERATION_CAP,
    GroupLayout,
    GroupedVector,
    PolymatrixGame,
    PsneSet,
    all_profiles,
    best_responses,
    check_separability,
    enumerate_eps_ne,
    enumerate_psne,
    featurize,
    game_from_parameters,
    is_eps_ne,
    is_psne,
    linear_payoff,
    pack_parameters,
    payoff,
    payoff_shift,
    price_of_anarchy,
    profile_count,
    unpack_parameters,
    welfare,
    welfare_extremes,
)
from .observation import (
    Dataset,
    GlobalNoise,
    LocalNoise,
    check_observation_condition,
    global_noise_pmf,
    local_noise_pmf,
    pmf_table,
    sample_dataset,
    sample_from_pmf,
    sample_profile_counts,
)
from .learner import (
    FitDiagnostics,
    FitResult,
    LearnedModel,
    LearnerConfig,
    diagnostics_min_eigen,
    empirical_loss,
    fit_game,
    fit_player,
    gradient,
    group_prox,
    hessian,
    lambda_schedule,
    population_hessian,
    sample_loss,
    sample_schedule,
    softmax_sigma,
    theorem_epsilon,
)
from .ensembles import (
    HardEnsembleSpec,
    RandomGameSpec,
    hard_game,
    hard_game_equilibrium,
    maj,
    random_game,
)
from .experiments import (
    ExperimentReport,
    ExperimentSpec,
    Theorem1Evaluation,
    TrialRecord,
    derive_seed,
    evaluate_theorem1,
    phase_transition_sweep,
    recovery_trial,
    sample_count,
)
