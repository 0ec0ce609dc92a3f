"""Deadband-constrained MPC toolkit for spacecraft rendezvous.

Pulse-width discretized Clohessy-Wiltshire dynamics, a condensed
box-constrained QP core, three thrust-allocation solvers (relaxed,
projected, branch-and-bound), and a closed-loop nonlinear simulator with
fuel / mission-time / solve-time metrics.
"""

from .scenario import LvlhState, ScenarioConfig, SolverId, default_scenario, default_thrust_forces
from .dynamics import (
    AffineModel,
    CwModel,
    FatalNumericError,
    TargetOrbit,
    cw_state_matrix,
    exact_step,
    full_dynamics_rhs,
    grammian,
    linearize_actuation,
    make_affine_model,
    make_cw_model,
    make_target_orbit,
    matrix_exponential,
    target_pose,
    transition_closed_form,
)
from .qp import BoxQp, BoxQpSolver, CondensedMpc, QpSolution, condense, solve_box_qp
from .solvers import (
    FEASIBILITY_TOL,
    ActivationLock,
    OracleSolver,
    ProjectedSolver,
    RelaxedSolver,
    SolveReport,
    SolverStatus,
    StandardSolver,
    evaluate_objective,
    gate_command,
    is_pulse_feasible,
    make_solver,
    project_feasible,
    solve_oracle,
    solve_projected,
    solve_relaxed,
    solve_standard,
)
from .simulation import (
    ARRIVAL_RADIUS,
    ActuationLog,
    SimResult,
    SimulationAborted,
    compute_metrics,
    integrate_step,
    run_closed_loop,
    run_repetitions,
)
from .experiments import (
    ConfigError,
    ExperimentSpec,
    SweepAxis,
    TimingStats,
    load_config,
    read_actuation_csv,
    read_trajectory_csv,
    run_experiment,
    summarize_timing,
)

__version__ = "0.1.0"
