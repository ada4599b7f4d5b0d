"""Utility-preserving trajectory distortion for switched linear systems.

Given input-output data generated by one operation mode of a device, the
toolkit distorts it, in batch or sample by sample, so that the result is
exactly consistent with a chosen target mode while a known affine
functional of the output trajectory keeps its value.  A classifier
module scores trajectories by behaviour membership to verify that the
cloaking works.
"""

from .classify import AMBIGUOUS, NONE, ClassificationReport, classify, mode_residual
from .distort import (
    DistortedTrajectory,
    DistortionConfig,
    DistortionEngine,
    HorizonExhaustedError,
    InconsistentDataError,
    StateReconstruction,
    init_engine,
    reconstruct_state,
    run_offline,
)
from .invariance import (
    InvarianceInfeasibleError,
    KernelAssumptionError,
    KernelPlan,
    LiftedOperators,
    UtilitySpec,
    build_lifted_operators,
    kernel_projector,
    load_kernel_plan,
    load_utility_spec,
    save_kernel_plan,
    save_utility_spec,
    solve_utility_invariance,
)
from .linalg import (
    DEFAULT_TOL,
    ToleranceConfig,
    eigenvalues,
    is_schur,
    lstsq_min_norm,
    matrix_exponential,
    nullspace_basis,
    pseudoinverse,
    spectral_radius,
)
from .modes import (
    ContinuousMode,
    ModeBank,
    ModeValidationReport,
    StateSpaceMode,
    Trajectory,
    discretize_zoh,
    load_mode_bank,
    longitudinal_vehicle_mode,
    read_trajectory_csv,
    save_mode_bank,
    simulate_mode,
    validate_mode,
    vehicle_demo_bank,
    write_trajectory_csv,
)
from .regulation import (
    GainDesignError,
    RegulationDiagnostics,
    RegulationInfeasibleError,
    RegulatorSolution,
    TrackingController,
    build_tracking_controller,
    design_stabilizing_gain,
    load_controller,
    regulator_residuals,
    save_controller,
    solve_regulator_equations,
    verify_regulation,
)

__version__ = "0.1.0"
