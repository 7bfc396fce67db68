"""Two-region MFD traffic dynamics with learning-based tracking perimeter control."""

from .adp import (
    AdpProblem,
    BasisSpec,
    CriticActorWeights,
    ProbingNoise,
    TransitionSample,
    bellman_residual,
    collect_samples,
    irl_lstsq,
    load_weights,
    policy_iteration_model_based,
    policy_iteration_model_free,
    save_weights,
)
from .augmented import (
    AugmentedState,
    CostWeights,
    FeedbackAction,
    augment,
    augmented_rhs,
    control_cost,
    hamiltonian,
    saturated_policy,
    stage_cost,
)
from .config import ExperimentConfig
from .demand import DemandNoise, DemandProfile, DemandSegment
from .exceptions import (
    ConfigError,
    InfeasibleSetpointError,
    InsufficientExcitationError,
    MfdTrackError,
    NoConvergenceError,
    NumericalError,
    SingularSteadyStateError,
)
from .metrics import MetricsReport, compute_metrics
from .mfd import (
    ControlInput,
    DemandVector,
    MfdCurve,
    OdAccumulation,
    TwoRegionNetwork,
    critical_accumulation,
    drift_and_input,
    dynamics_rhs,
    integrate,
    trip_completion,
)
from .reference import (
    CommandGenerator,
    ReferenceState,
    SetpointInterval,
    SetpointSchedule,
    equilibrium_solve,
    reference_at,
    steady_state_control,
    trajectory_rhs,
)
from .runtime import (
    ActuatorBox,
    ControllerConfig,
    TrafficTrainingEnv,
    compute_control,
    realize_demand,
    run_closed_loop,
)
from .trace import SimulationTrace

__version__ = "0.1.0"
