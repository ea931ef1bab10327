"""Tools for deciding when naive probability updating agrees with
conditioning on the runs of an observation protocol."""

from carkit.car import (
    AtomPartition,
    Blocker,
    CarCheckReport,
    CaracterizingMatrix,
    GammaSolution,
    build_matrix,
    caracterizing_matrix,
    check_car,
    compute_atoms,
    construct_car_distribution,
    detect_blockers,
    forced_observation_distribution,
    gamma_from_distribution,
    is_pairwise_disjoint,
    solve_gamma,
)
from carkit.cargen import (
    CarGenParams,
    Partition,
    closed_form_distribution,
    fit_without_rejection,
    simulate,
    synthesize_params,
    validate_params,
)
from carkit.jeffrey import (
    PartitionConstraint,
    ProbJointDistribution,
    check_accuracy,
    check_generalized_car,
    construct_gcar_distribution,
    jeffrey_update,
)
from carkit.mre import (
    LinearConstraint,
    WeightedEventConstraint,
    check_two_observation_compatibility,
    conditional_to_linear,
    is_jeffrey_like,
    mre_update,
    relative_entropy,
    weighted_to_linear,
)
from carkit.rational import (
    DependenceCertificate,
    RationalMatrix,
    affine_dependence,
    nonneg_affine_combination,
    solve,
)
from carkit.scenarios import Scenario, builtin, run_report
from carkit.space import (
    Event,
    JointDistribution,
    NaiveDistribution,
    ObservationSet,
    WorldSpace,
    condition_naive,
    condition_sophisticated,
    marginal_obs,
    marginal_world,
    observations,
)

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "builtin",
    "run_report",
    "AtomPartition",
    "Blocker",
    "CarCheckReport",
    "CarGenParams",
    "CaracterizingMatrix",
    "DependenceCertificate",
    "Event",
    "GammaSolution",
    "JointDistribution",
    "LinearConstraint",
    "NaiveDistribution",
    "ObservationSet",
    "Partition",
    "PartitionConstraint",
    "ProbJointDistribution",
    "RationalMatrix",
    "WeightedEventConstraint",
    "WorldSpace",
    "affine_dependence",
    "build_matrix",
    "caracterizing_matrix",
    "check_accuracy",
    "check_car",
    "check_generalized_car",
    "check_two_observation_compatibility",
    "closed_form_distribution",
    "compute_atoms",
    "condition_naive",
    "condition_sophisticated",
    "conditional_to_linear",
    "construct_car_distribution",
    "construct_gcar_distribution",
    "detect_blockers",
    "fit_without_rejection",
    "forced_observation_distribution",
    "gamma_from_distribution",
    "is_jeffrey_like",
    "is_pairwise_disjoint",
    "jeffrey_update",
    "marginal_obs",
    "marginal_world",
    "mre_update",
    "nonneg_affine_combination",
    "observations",
    "relative_entropy",
    "simulate",
    "solve",
    "solve_gamma",
    "synthesize_params",
    "validate_params",
    "weighted_to_linear",
]
