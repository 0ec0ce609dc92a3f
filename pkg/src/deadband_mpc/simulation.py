"""Closed-loop simulation: at each sampling instant the configured solver
plans from the current state, the first control is applied to the full
nonlinear plant as rectangular thruster pulses, and mission metrics are
accumulated.

The plant is the full two-body relative dynamics, not the controller's CW
model, so the model mismatch of a real deployment is exercised. Integration
is fixed-step RK4 with the interval split at every pulse end-time, keeping
the piecewise-constant actuation smooth inside each sub-interval.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (
    FatalNumericError,
    TargetOrbit,
    full_dynamics_rhs,
    make_affine_model,
    make_target_orbit,
)
from .scenario import LvlhState, ScenarioConfig
from .solvers import MpcSolverBase, SolverStatus, make_solver

#: Chaser-target distance defining mission completion (m).
ARRIVAL_RADIUS = 1000.0


@dataclass(frozen=True)
class ActuationLog:
    """Per-step record of commands and solver diagnostics."""

    pulses: np.ndarray  # (K, M) commanded durations, s
    solve_times: np.ndarray  # (K,) wall-clock seconds around the solver call only
    iterations: np.ndarray  # (K,) solver-specific iteration / node counts
    statuses: tuple[SolverStatus, ...]

    @property
    def fuel(self) -> float:
        """Total thruster-on time (s); exact sum of the logged pulses."""
        return float(self.pulses.sum())


@dataclass(frozen=True)
class SimResult:
    """Closed-loop run output.

    `times`/`states` sample every integration sub-step; `grid_times`/
    `grid_states` sample only the controller instants k*h, which are the
    grid the mission-time test scans. mission_time is None when the final
    sample is still outside the arrival sphere. All fields except
    `actuation.solve_times` are deterministic functions of the config.
    """

    times: np.ndarray  # (S,)
    states: np.ndarray  # (S, 6)
    grid_times: np.ndarray  # (K+1,)
    grid_states: np.ndarray  # (K+1, 6)
    actuation: ActuationLog
    fuel: float
    mission_time: float | None

    @property
    def solve_times(self) -> np.ndarray:
        return self.actuation.solve_times


class SimulationAborted(RuntimeError):
    """A run died mid-loop; `partial` carries everything logged so far."""

    def __init__(self, message: str, partial: SimResult):
        super().__init__(message)
        self.partial = partial


def integrate_step(
    cfg: ScenarioConfig,
    orbit: TargetOrbit,
    t0: float,
    x: np.ndarray,
    pulses: np.ndarray,
    record: list | None = None,
) -> np.ndarray:
    """Propagate the full nonlinear state over one sampling period.

    The interval [t0, t0 + h] is split at every distinct pulse end-time so
    the net thrust is constant within each segment; each segment is covered
    by RK4 sub-steps no longer than cfg.rk_max_step. When `record` is given,
    (t, state) samples are appended after every sub-step.
    """
    h = cfg.sampling_period
    pulses = np.asarray(pulses, dtype=float)
    cuts = np.unique(pulses[(pulses > 0.0) & (pulses < h)])
    boundaries = np.concatenate([[0.0], cuts, [h]])

    state = np.asarray(x, dtype=float).copy()
    for seg_start, seg_end in zip(boundaries[:-1], boundaries[1:]):
        # thruster i is on throughout this segment iff its pulse outlasts it
        force = cfg.thrust_forces[pulses >= seg_end].sum(axis=0)
        steps = max(1, int(np.ceil((seg_end - seg_start) / cfg.rk_max_step)))
        dt = (seg_end - seg_start) / steps
        local = seg_start
        for _ in range(steps):
            t_abs = t0 + local
            k1 = full_dynamics_rhs(cfg, orbit, t_abs, state, force)
            k2 = full_dynamics_rhs(cfg, orbit, t_abs + 0.5 * dt, state + 0.5 * dt * k1, force)
            k3 = full_dynamics_rhs(cfg, orbit, t_abs + 0.5 * dt, state + 0.5 * dt * k2, force)
            k4 = full_dynamics_rhs(cfg, orbit, t_abs + dt, state + dt * k3, force)
            state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            local += dt
            if not np.isfinite(state).all():
                raise FatalNumericError(
                    f"non-finite state while integrating [{t0}, {t0 + h}] at t = {t0 + local}"
                )
            if record is not None:
                record.append((t0 + local, state.copy()))
    return state


def compute_metrics(
    grid_times: np.ndarray, grid_states: np.ndarray, pulses: np.ndarray
) -> tuple[float, float | None]:
    """Fuel (total on-time) and mission time from sampled data.

    Mission time is the earliest sampled instant after which the chaser
    never leaves the 1 km arrival sphere, scanned on the controller grid;
    None when the final sample is outside.
    """
    fuel = float(pulses.sum())
    distances = np.linalg.norm(grid_states[:, :3], axis=1)
    outside = distances > ARRIVAL_RADIUS
    if outside[-1]:
        return fuel, None
    if not outside.any():
        return fuel, float(grid_times[0])
    last_outside = int(np.flatnonzero(outside)[-1])
    return fuel, float(grid_times[last_outside + 1])


def _initial_state_vector(cfg: ScenarioConfig) -> np.ndarray:
    x0 = cfg.initial_state.as_vector()
    if cfg.initial_state_jitter > 0.0:
        rng = np.random.default_rng(cfg.rng_seed)
        x0 = x0 + np.concatenate(
            [
                cfg.initial_state_jitter * rng.standard_normal(3),
                1e-3 * cfg.initial_state_jitter * rng.standard_normal(3),
            ]
        )
    return x0


def run_closed_loop(cfg: ScenarioConfig, solver: MpcSolverBase | None = None) -> SimResult:
    """Run the full receding-horizon loop for cfg.sim_duration seconds.

    The affine controller model depends only on run constants and is built
    once. A solver instance may be passed in for instrumentation; by
    default one is created from the config. On a solver or integration
    failure the partial log is attached to the raised SimulationAborted.
    """
    orbit = make_target_orbit(cfg)
    if solver is None:
        solver = make_solver(cfg, make_affine_model(cfg))
    h = cfg.sampling_period
    steps = int(np.floor(cfg.sim_duration / h + 1e-9))

    x = _initial_state_vector(cfg)
    dense: list[tuple[float, np.ndarray]] = [(0.0, x.copy())]
    grid_times = [0.0]
    grid_states = [x.copy()]
    pulses: list[np.ndarray] = []
    solve_times: list[float] = []
    iterations: list[int] = []
    statuses: list[SolverStatus] = []

    def build_result() -> SimResult:
        log = ActuationLog(
            pulses=np.array(pulses).reshape(len(pulses), -1) if pulses else np.zeros((0, cfg.thruster_count)),
            solve_times=np.array(solve_times),
            iterations=np.array(iterations, dtype=int),
            statuses=tuple(statuses),
        )
        gt = np.array(grid_times)
        gs = np.array(grid_states)
        fuel, mission = compute_metrics(gt, gs, log.pulses)
        times = np.array([t for t, _ in dense])
        states = np.array([s for _, s in dense])
        return SimResult(
            times=times,
            states=states,
            grid_times=gt,
            grid_states=gs,
            actuation=log,
            fuel=fuel,
            mission_time=mission,
        )

    for k in range(steps):
        try:
            report = solver.solve(x)
            command = report.s0_command
            pulses.append(np.asarray(command, dtype=float))
            solve_times.append(report.wall_time)
            iterations.append(report.iterations)
            statuses.append(report.status)
            x = integrate_step(cfg, orbit, k * h, x, command, record=dense)
        except FatalNumericError as exc:
            raise SimulationAborted(f"run aborted at step {k}: {exc}", build_result()) from exc
        grid_times.append((k + 1) * h)
        grid_states.append(x.copy())

    return build_result()


def run_repetitions(cfg: ScenarioConfig, repetitions: int) -> list[SimResult]:
    """Independent repetitions of one scenario, reseeded per repetition.

    With initial_state_jitter = 0 the repetitions are identical runs and
    only resample solver timing noise; with jitter > 0 each repetition
    perturbs the initial state deterministically from rng_seed + index.
    """
    results = []
    for rep in range(repetitions):
        rep_cfg = replace(cfg, rng_seed=cfg.rng_seed + rep)
        results.append(run_closed_loop(rep_cfg))
    return results


def initial_lvlh_state(cfg: ScenarioConfig) -> LvlhState:
    """Possibly-jittered initial state actually used by a run."""
    return LvlhState.from_vector(_initial_state_vector(cfg))
