"""Thrust-allocation MPC solvers over the semi-continuous pulse set.

Each thruster's per-step duration must lie in {0} u [h_min, h]: off, or on
for at least the minimum activation time. Four solvers share the condensed
QP core:

* relaxed   - one QP over [0, h]^M per step, first control gated into the
              feasible set (sub-minimum requests suppressed).
* projected - repeated QPs that lock deadband-violating thrusters of the
              first control to off / minimum-on, at most M+1 rounds.
* standard  - best-first branch-and-bound over on/off activations across
              the whole horizon; the reference-quality solver.
* oracle    - exhaustive enumeration of every activation pattern, for
              small horizons only; ground truth in tests.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import AffineModel, make_affine_model
from .qp import CondensedMpc, QpSolution
from .scenario import ScenarioConfig, SolverId

#: Tolerance used when classifying solver output against the deadband set.
FEASIBILITY_TOL = 1e-12


def project_feasible(s: np.ndarray, h_min: float, h: float) -> np.ndarray:
    """Componentwise nearest point of {0} u [h_min, h].

    Values at or below h_min/2 map to 0 (the tie at exactly h_min/2 is
    broken toward 0: no fuel is spent on an ambiguous request), values
    between h_min/2 and h_min map to h_min, and everything else clips to
    [0, h] (h_min <= s <= h is returned unchanged).
    """
    s = np.asarray(s, dtype=float)
    out = np.clip(s, 0.0, h)
    out = np.where(s <= 0.5 * h_min, 0.0, out)
    return np.where((s > 0.5 * h_min) & (s < h_min), h_min, out)


def is_pulse_feasible(s: np.ndarray, h_min: float, h: float, tol: float = FEASIBILITY_TOL) -> bool:
    """Whether every duration is within tol of the deadband set."""
    s = np.asarray(s, dtype=float)
    return bool(np.abs(s - project_feasible(s, h_min, h)).max(initial=0.0) <= tol)


def gate_command(s: np.ndarray, h_min: float, h: float, tol: float = 1e-9) -> np.ndarray:
    """Feasibility gate for commands about to be fired.

    Requests below the minimum activation are suppressed (a thruster that
    cannot honor the request stays silent rather than firing the minimum
    pulse, which would apply up to twice the requested impulse); requests at
    or above it clip into [h_min, h]. Values within tol of h_min count as
    at it. With h_min = 0 this is a plain clip to [0, h].

    This deliberately differs from the nearest-point projection used inside
    the solvers: rounding borderline requests up to h_min sustains a firing
    limit cycle around the target that roughly doubles station-keeping fuel
    in closed loop.
    """
    s = np.asarray(s, dtype=float)
    return np.where(s < h_min - tol, 0.0, np.clip(s, h_min, h))


@dataclass(frozen=True)
class ActivationLock:
    """Per-thruster first-step locks: alpha_i = 1 pins thruster i on
    ([h_min, h]), beta_i = 1 pins it off ({0}); at most one of the two."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if alpha.shape != beta.shape or alpha.ndim != 1:
            raise ValueError("alpha and beta must be 1-d arrays of equal length")
        if np.any(alpha * beta != 0.0):
            raise ValueError("activation locks must satisfy alpha_i * beta_i = 0")
        alpha.flags.writeable = False
        beta.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def unlocked(cls, m: int) -> "ActivationLock":
        return cls(np.zeros(m), np.zeros(m))

    def first_step_bounds(self, h_min: float, h: float) -> tuple[np.ndarray, np.ndarray]:
        return self.alpha * h_min, (1.0 - self.beta) * h

    def locked_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alpha + self.beta > 0.0)


class SolverStatus(str, Enum):
    OPTIMAL = "optimal"
    APPROX_FEASIBLE = "approx_feasible"
    INFEASIBLE = "infeasible"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one MPC step: the command to apply now plus diagnostics."""

    s0_command: np.ndarray  # (M,) feasible first control
    planned_sequence: np.ndarray  # (N, M) full plan, informational
    objective: float
    wall_time: float
    iterations: int  # lock rounds (projected), nodes (standard), 1 (relaxed)
    status: SolverStatus


def evaluate_objective(
    aff: AffineModel, x: np.ndarray, sequence: np.ndarray, state_weight: np.ndarray
) -> float:
    """Cost of an explicit duration sequence: terminal x[N]'Qx[N] plus total
    thruster-on time, with x[N] from the affine model rollout."""
    state = np.asarray(x, dtype=float)
    sequence = np.atleast_2d(np.asarray(sequence, dtype=float))
    for row in sequence:
        state = aff.step(state, row)
    weight = np.asarray(state_weight, dtype=float)
    return float(state @ (weight @ state) + sequence.sum())


class MpcSolverBase:
    """Shared machinery: condensed workspace, warm starting, timing.

    Warm starts carry the previous step's solution shifted by one step with
    the last block padded at the linearization point; this dominates the
    closed-loop solve-time profile. One instance per run; not thread-safe.
    """

    def __init__(self, aff: AffineModel, cfg: ScenarioConfig):
        self.aff = aff
        self.cfg = cfg
        self.h = cfg.sampling_period
        self.h_min = cfg.min_activation
        self.horizon = cfg.horizon
        self.m = aff.thruster_count
        self.n = self.horizon * self.m
        self.condensed = CondensedMpc(
            aff, cfg.state_weight, cfg.horizon, reg_scale=cfg.qp_regularization_scale
        )
        self._relaxed_lower = np.zeros(self.n)
        self._relaxed_upper = np.full(self.n, self.h)
        self._warm: np.ndarray | None = None

    def solve(self, x: np.ndarray) -> SolveReport:
        begin = time.perf_counter()
        command, plan, objective, iterations, status = self._solve(np.asarray(x, dtype=float))
        elapsed = time.perf_counter() - begin
        return SolveReport(
            s0_command=command,
            planned_sequence=plan,
            objective=objective,
            wall_time=elapsed,
            iterations=iterations,
            status=status,
        )

    def _solve(self, x):
        raise NotImplementedError

    def _solve_qp(self, x, lower, upper, start) -> QpSolution:
        return self.condensed.solve(
            x,
            lower,
            upper,
            start=start,
            tol=self.cfg.qp_tolerance,
            max_iter=self.cfg.qp_max_iterations,
        )

    def _shifted(self, z: np.ndarray) -> np.ndarray:
        return np.concatenate([z[self.m :], np.full(self.m, self.aff.s0)])

    def _project_first(self, z: np.ndarray) -> np.ndarray:
        return project_feasible(z[: self.m], self.h_min, self.h)

    def _project_plan(self, z: np.ndarray) -> np.ndarray:
        plan = z.reshape(self.horizon, self.m)
        return project_feasible(plan, self.h_min, self.h)


class RelaxedSolver(MpcSolverBase):
    """Single relaxed QP over [0, h]^M per step; the first control is gated
    into the deadband set (sub-minimum requests stay off) and fired."""

    def _solve(self, x):
        sol = self._solve_qp(x, self._relaxed_lower, self._relaxed_upper, self._warm)
        self._warm = self._shifted(sol.z)
        command = gate_command(sol.z[: self.m], self.h_min, self.h)
        status = SolverStatus.OPTIMAL if sol.converged else SolverStatus.TIMEOUT
        plan = sol.z.reshape(self.horizon, self.m)
        return command, plan, sol.objective, 1, status


class ProjectedSolver(MpcSolverBase):
    """Relaxed QP with progressive first-step locks until the first control
    is deadband-feasible; terminates in at most M+1 rounds because every
    round locks at least one previously free thruster.

    Each call appends its per-round lock states to `lock_history` (a list of
    ActivationLock lists, one per call) for inspection.
    """

    def __init__(self, aff: AffineModel, cfg: ScenarioConfig):
        super().__init__(aff, cfg)
        self.lock_history: list[list[ActivationLock]] = []

    def _solve(self, x):
        locks = ActivationLock.unlocked(self.m)
        call_locks = [locks]
        lower = self._relaxed_lower.copy()
        upper = self._relaxed_upper.copy()
        inner_start = self._warm
        last_sol: QpSolution | None = None

        for round_idx in range(self.m + 1):
            lower[: self.m], upper[: self.m] = locks.first_step_bounds(self.h_min, self.h)
            sol = self._solve_qp(x, lower, upper, inner_start)
            inner_start = sol.z
            last_sol = sol
            first = sol.z[: self.m]
            if is_pulse_feasible(first, self.h_min, self.h):
                self._warm = self._shifted(sol.z)
                self.lock_history.append(call_locks)
                command = self._project_first(sol.z)
                status = SolverStatus.OPTIMAL if sol.converged else SolverStatus.TIMEOUT
                plan = sol.z.reshape(self.horizon, self.m)
                return command, plan, sol.objective, round_idx + 1, status
            projected = project_feasible(first, self.h_min, self.h)
            infeasible = np.abs(first - projected) > FEASIBILITY_TOL
            if not infeasible.any():  # pragma: no cover - contradicts the check above
                raise AssertionError("infeasible first control with no violating component")
            alpha = locks.alpha.copy()
            beta = locks.beta.copy()
            alpha[infeasible] = projected[infeasible] / self.h_min
            beta[infeasible] = np.abs(1.0 - alpha[infeasible])
            locks = ActivationLock(alpha, beta)
            call_locks.append(locks)

        # Unreachable when each round locks a new index; kept as a guard.
        assert last_sol is not None
        self._warm = self._shifted(last_sol.z)
        self.lock_history.append(call_locks)
        command = self._project_first(last_sol.z)
        plan = last_sol.z.reshape(self.horizon, self.m)
        return command, plan, last_sol.objective, self.m + 1, SolverStatus.APPROX_FEASIBLE


class StandardSolver(MpcSolverBase):
    """Best-first branch-and-bound over per-variable on/off activations.

    Every stacked duration is semi-continuous; branching fixes the most
    fractional one (deepest into the open interval (0, h_min), normalized by
    h_min/2, ties to the lowest index) to off ([0, 0]) or on ([h_min, h]).
    Node bounds are relaxation values; the incumbent starts from the
    projected relaxed plan, so the search never returns anything worse.
    Nodes whose bound is within the relative gap tolerance of the incumbent
    are pruned. `incumbent_history` records (node_count, objective) pairs
    for the most recent call.
    """

    #: components this far inside (0, h_min) count as fractional for branching
    BRANCH_TOL = 1e-9

    def __init__(self, aff: AffineModel, cfg: ScenarioConfig):
        super().__init__(aff, cfg)
        self.incumbent_history: list[tuple[int, float]] = []

    def _sequence_objective(self, x, plan: np.ndarray) -> float:
        return evaluate_objective(self.aff, x, plan, self.cfg.state_weight)

    def _fractionality(self, z: np.ndarray) -> np.ndarray:
        if self.h_min <= 0.0:
            return np.zeros_like(z)
        depth = np.minimum(z, self.h_min - z) / (0.5 * self.h_min)
        inside = (z > self.BRANCH_TOL) & (z < self.h_min - self.BRANCH_TOL)
        return np.where(inside, depth, 0.0)

    def _solve(self, x):
        gap = self.cfg.bnb_gap_tolerance
        budget = self.cfg.bnb_node_budget
        self.incumbent_history = []

        root = self._solve_qp(x, self._relaxed_lower, self._relaxed_upper, self._warm)
        self._warm = self._shifted(root.z)
        nodes = 1

        incumbent_plan = self._project_plan(root.z)
        incumbent_obj = self._sequence_objective(x, incumbent_plan)
        self.incumbent_history.append((nodes, incumbent_obj))

        root_frac = self._fractionality(root.z)
        if not root_frac.any():
            return (
                incumbent_plan[0],
                incumbent_plan,
                incumbent_obj,
                nodes,
                SolverStatus.OPTIMAL if root.converged else SolverStatus.TIMEOUT,
            )

        counter = itertools.count()
        heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
        heapq.heappush(
            heap, (root.objective, next(counter), self._relaxed_lower, self._relaxed_upper, root.z)
        )
        exhausted = False

        while heap:
            bound, _, lower, upper, z_node = heapq.heappop(heap)
            if bound >= incumbent_obj * (1.0 - gap):
                break  # best-first: every remaining node is at least as bad
            if nodes >= budget:
                exhausted = True
                break
            frac = self._fractionality(z_node)
            branch_var = int(np.argmax(frac))  # argmax takes the lowest index on ties
            for off_branch in (True, False):
                child_lower = lower.copy()
                child_upper = upper.copy()
                if off_branch:
                    child_lower[branch_var] = 0.0
                    child_upper[branch_var] = 0.0
                else:
                    child_lower[branch_var] = self.h_min
                    child_upper[branch_var] = self.h
                child = self._solve_qp(x, child_lower, child_upper, np.clip(z_node, child_lower, child_upper))
                nodes += 1
                if child.objective >= incumbent_obj * (1.0 - gap):
                    continue
                child_frac = self._fractionality(child.z)
                if not child_frac.any():
                    plan = self._project_plan(child.z)
                    objective = self._sequence_objective(x, plan)
                    if objective < incumbent_obj:
                        incumbent_obj = objective
                        incumbent_plan = plan
                        self.incumbent_history.append((nodes, incumbent_obj))
                else:
                    heapq.heappush(heap, (child.objective, next(counter), child_lower, child_upper, child.z))
                if nodes >= budget:
                    exhausted = True
                    break
            if exhausted:
                break

        status = SolverStatus.TIMEOUT if exhausted else SolverStatus.OPTIMAL
        return incumbent_plan[0], incumbent_plan, incumbent_obj, nodes, status


class OracleSolver(MpcSolverBase):
    """Exhaustive enumeration of all 2^(N*M) activation patterns.

    Ground truth for small instances; refuses anything above 16 variables.
    """

    MAX_VARIABLES = 16

    def __init__(self, aff: AffineModel, cfg: ScenarioConfig):
        super().__init__(aff, cfg)
        if cfg.horizon * aff.thruster_count > self.MAX_VARIABLES:
            raise ValueError(
                f"oracle enumeration limited to {self.MAX_VARIABLES} variables, "
                f"got {cfg.horizon * aff.thruster_count}"
            )
        self.patterns_visited = 0

    def _solve(self, x):
        best_obj = np.inf
        best_z: np.ndarray | None = None
        start = np.zeros(self.n)
        self.patterns_visited = 0
        for pattern in itertools.product((0.0, 1.0), repeat=self.n):
            on = np.array(pattern)
            lower = on * self.h_min
            upper = on * self.h
            sol = self._solve_qp(x, lower, upper, np.clip(start, lower, upper))
            self.patterns_visited += 1
            if sol.objective < best_obj:
                best_obj = sol.objective
                best_z = sol.z
        assert best_z is not None
        plan = self._project_plan(best_z)  # snaps bound values exactly
        objective = evaluate_objective(self.aff, x, plan, self.cfg.state_weight)
        return plan[0], plan, objective, self.patterns_visited, SolverStatus.OPTIMAL


_SOLVER_CLASSES = {
    SolverId.STANDARD: StandardSolver,
    SolverId.PROJECTED: ProjectedSolver,
    SolverId.RELAXED: RelaxedSolver,
    SolverId.ORACLE: OracleSolver,
}


def make_solver(cfg: ScenarioConfig, aff: AffineModel | None = None) -> MpcSolverBase:
    """Instantiate the solver named by cfg.solver_id with a fresh workspace."""
    if aff is None:
        aff = make_affine_model(cfg)
    return _SOLVER_CLASSES[SolverId(cfg.solver_id)](aff, cfg)


def solve_relaxed(x, aff: AffineModel, cfg: ScenarioConfig) -> SolveReport:
    return RelaxedSolver(aff, cfg).solve(x)


def solve_projected(x, aff: AffineModel, cfg: ScenarioConfig) -> SolveReport:
    return ProjectedSolver(aff, cfg).solve(x)


def solve_standard(x, aff: AffineModel, cfg: ScenarioConfig) -> SolveReport:
    return StandardSolver(aff, cfg).solve(x)


def solve_oracle(x, aff: AffineModel, cfg: ScenarioConfig) -> SolveReport:
    return OracleSolver(aff, cfg).solve(x)
