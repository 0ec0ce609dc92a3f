"""Condensed box-constrained convex QP: problem container, condensing of the
finite-horizon control problem, and an accelerated projected-gradient solver.

The solver minimizes f(z) = 0.5 z'Hz + g'z + c0 over l <= z <= u. H is
positive semidefinite with low rank (the terminal cost sees only a
6-dimensional image), so a small Tikhonov term eps*I with
eps = reg_scale * (1 + ||H||_inf) is added internally to make the minimizer
unique. Reported objectives never include the regularization term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import AffineModel


@dataclass(frozen=True)
class BoxQp:
    """Dense convex QP over a box: minimize 0.5 z'Hz + g'z + c0, l <= z <= u."""

    hessian: np.ndarray
    linear: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.hessian, dtype=float)
        g = np.asarray(self.linear, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        n = g.shape[0]
        if h.shape != (n, n) or lo.shape != (n,) or up.shape != (n,):
            raise ValueError("inconsistent BoxQp dimensions")
        if np.abs(h - h.T).max(initial=0.0) > 1e-12:
            raise ValueError("hessian must be symmetric to 1e-12")
        if not (np.isfinite(lo).all() and np.isfinite(up).all()):
            raise ValueError("bounds must be finite")
        if np.any(lo > up):
            raise ValueError("lower bounds must not exceed upper bounds")
        for name, arr in (("hessian", h), ("linear", g), ("lower", lo), ("upper", up)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.linear.shape[0]

    def validate_psd(self, slack: float = 1e-9) -> None:
        """Eigenvalue check, separate from construction because it is O(n^3)."""
        min_eig = float(np.linalg.eigvalsh(self.hessian).min())
        if min_eig < -slack:
            raise ValueError(f"hessian is not PSD: min eigenvalue {min_eig}")

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ (self.hessian @ z) + self.linear @ z + self.constant)


@dataclass(frozen=True)
class QpSolution:
    """Result of a box-QP solve. z is always inside the box (exact clip)."""

    z: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float


class BoxQpSolver:
    """Operator-splitting workspace for repeated solves with a fixed Hessian.

    Building the workspace runs the one-time analysis (regularization and
    factorization of the splitting system); `minimize` can then be called
    repeatedly with different linear terms, bounds, and warm starts, which
    is what the receding-horizon solvers and branch-and-bound rely on: only
    the right-hand side and the clip set change between calls.

    The iteration is over-relaxed ADMM on the splitting f(z) + box(v),
    z = v, with periodic exact polishes of the free block once the clip
    pattern stabilizes (a polish is kept only when it lowers the
    projected-gradient residual, so a wrong active-set guess is harmless).
    Convergence is certified by that residual on the feasible iterate, so
    the contract is independent of the splitting internals.

    Instances hold mutable scratch state and are single-threaded; use one
    instance per concurrent caller.
    """

    #: cadence (in iterations) of polish attempts and rho rebalancing
    POLISH_PERIOD = 25
    RELAXATION = 1.6

    def __init__(self, hessian: np.ndarray, reg_scale: float = 1e-9):
        h = np.asarray(hessian, dtype=float)
        n = h.shape[0]
        if h.shape != (n, n):
            raise ValueError("hessian must be square")
        norm_inf = np.abs(h).sum(axis=1).max(initial=0.0)
        self.epsilon = reg_scale * (1.0 + norm_inf)
        self._hessian = h
        self._h_reg = h + self.epsilon * np.eye(n)
        self.n = n
        self._rho = float(np.clip(np.median(np.diag(self._h_reg)), 1e-6, None))
        self._factorize()
        self.last_history: list[float] | None = None

    def _factorize(self) -> None:
        # well-conditioned by construction: kappa <= (lambda_max + rho) / rho
        self._m_inv = np.linalg.inv(self._h_reg + self._rho * np.eye(self.n))

    def _polish(self, v: np.ndarray, grad: np.ndarray, lower, upper) -> np.ndarray | None:
        """Solve the free block of (H + eps I) z = -g exactly, with the
        active set read off the current iterate's clip pattern."""
        at_lower = (v <= lower) & (grad > 0.0)
        at_upper = (v >= upper) & (grad < 0.0)
        free = ~(at_lower | at_upper)
        polished = np.where(at_upper, upper, np.where(at_lower, lower, v))
        if free.any():
            fixed = polished.copy()
            fixed[free] = 0.0
            rhs = -(self._g_current + self._h_reg @ fixed)[free]
            try:
                polished[free] = np.linalg.solve(self._h_reg[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                return None
        return np.clip(polished, lower, upper)

    def minimize(
        self,
        linear: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        constant: float = 0.0,
        start: np.ndarray | None = None,
        tol: float = 1e-8,
        max_iter: int = 20_000,
        track_history: bool = False,
    ) -> QpSolution:
        """Minimize over the box; converged when the projected-gradient
        residual ||v - clip(v - grad(v), l, u)||_inf <= tol, with grad the
        gradient of the regularized objective at the feasible iterate v.
        The reported objective excludes the regularization term but includes
        the constant. With track_history, the best-objective-so-far sequence
        is kept in `self.last_history`.
        """
        g = np.asarray(linear, dtype=float)
        lo = np.asarray(lower, dtype=float)
        up = np.asarray(upper, dtype=float)
        eps = self.epsilon
        self._g_current = g

        def project(values: np.ndarray) -> np.ndarray:
            return np.clip(values, lo, up)

        def true_objective(z: np.ndarray, grad: np.ndarray) -> float:
            # 0.5 z'Hz + g'z from the regularized gradient, avoiding a second matvec
            return float(0.5 * z @ (grad + g) - 0.5 * eps * (z @ z) + constant)

        v = project(np.zeros(self.n) if start is None else np.asarray(start, dtype=float))
        dual = np.zeros(self.n)

        grad_v = self._h_reg @ v + g
        best_v = v
        best_obj = true_objective(v, grad_v)
        kkt = float(np.abs(v - project(v - grad_v)).max(initial=0.0))
        history = [best_obj] if track_history else None
        converged = kkt <= tol
        iterations = 0

        while not converged and iterations < max_iter:
            iterations += 1
            z = self._m_inv @ (self._rho * (v - dual) - g)
            z_relaxed = self.RELAXATION * z + (1.0 - self.RELAXATION) * v
            v_prev = v
            v = project(z_relaxed + dual)
            dual = dual + z_relaxed - v

            grad_v = self._h_reg @ v + g
            kkt = float(np.abs(v - project(v - grad_v)).max(initial=0.0))
            if kkt > tol and (iterations == 1 or iterations % self.POLISH_PERIOD == 0):
                polished = self._polish(v, grad_v, lo, up)
                if polished is not None:
                    grad_p = self._h_reg @ polished + g
                    kkt_p = float(np.abs(polished - project(polished - grad_p)).max(initial=0.0))
                    if kkt_p < kkt:
                        v, grad_v, kkt = polished, grad_p, kkt_p
                        dual = np.zeros(self.n)  # dual no longer matches the jumped iterate
                if iterations % self.POLISH_PERIOD == 0:
                    primal_res = float(np.linalg.norm(z - v_prev))
                    dual_res = float(self._rho * np.linalg.norm(v - v_prev))
                    if primal_res > 10.0 * dual_res and primal_res > tol:
                        self._rho *= 2.0
                        dual /= 2.0
                        self._factorize()
                    elif dual_res > 10.0 * primal_res and dual_res > tol:
                        self._rho /= 2.0
                        dual *= 2.0
                        self._factorize()

            obj_v = true_objective(v, grad_v)
            if obj_v < best_obj:
                best_obj = obj_v
                best_v = v
            if history is not None:
                history.append(best_obj)
            if kkt <= tol:
                best_v = v
                best_obj = obj_v
                converged = True

        if not converged:
            grad_best = self._h_reg @ best_v + g
            kkt = float(np.abs(best_v - project(best_v - grad_best)).max(initial=0.0))
        self.last_history = history
        return QpSolution(
            z=best_v,
            objective=best_obj,
            iterations=iterations,
            converged=converged,
            kkt_residual=kkt,
        )


def solve_box_qp(
    qp: BoxQp,
    tol: float = 1e-8,
    max_iter: int = 20_000,
    start: np.ndarray | None = None,
    reg_scale: float = 1e-9,
) -> QpSolution:
    """One-shot solve of a BoxQp (fresh workspace; see BoxQpSolver for reuse)."""
    solver = BoxQpSolver(qp.hessian, reg_scale=reg_scale)
    return solver.minimize(
        qp.linear, qp.lower, qp.upper, constant=qp.constant, start=start, tol=tol, max_iter=max_iter
    )


def _stack_bounds(bounds_per_step, horizon: int, thrusters: int) -> tuple[np.ndarray, np.ndarray]:
    bounds = np.asarray(bounds_per_step, dtype=float)
    if bounds.shape != (horizon, thrusters, 2):
        raise ValueError(
            f"bounds_per_step must have shape ({horizon}, {thrusters}, 2), got {bounds.shape}"
        )
    return bounds[:, :, 0].reshape(-1), bounds[:, :, 1].reshape(-1)


class CondensedMpc:
    """State-independent pieces of the condensed horizon problem.

    Eliminating the predicted states leaves the terminal state as an affine
    map of the stacked durations z = [s[0]; ...; s[N-1]]:

        x[N] = control_map z + state_map x0 + drift,

    so the cost x[N]'Qx[N] + 1'z becomes 0.5 z'Hz + g'z + c0 with
    H = 2 control_map' Q control_map fixed across a run and only (g, c0)
    depending on the current state. The embedded BoxQpSolver reuses the
    one-time Hessian analysis for every solve of a run.
    """

    def __init__(
        self,
        aff: AffineModel,
        state_weight: np.ndarray,
        horizon: int,
        reg_scale: float = 1e-9,
    ):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        weight = np.asarray(state_weight, dtype=float)
        try:
            np.linalg.cholesky(weight)
        except np.linalg.LinAlgError as exc:
            raise ValueError("state weight must be positive definite") from exc

        m = aff.thruster_count
        powers = [np.eye(6)]
        for _ in range(horizon):
            powers.append(aff.phi @ powers[-1])
        self.control_map = np.hstack([powers[horizon - 1 - n] @ aff.gamma for n in range(horizon)])
        self.state_map = powers[horizon]
        self.drift = sum(powers[:horizon]) @ aff.d
        weighted = weight @ self.control_map
        hessian = 2.0 * (self.control_map.T @ weighted)
        self.hessian = 0.5 * (hessian + hessian.T)
        self.weight = weight
        self.horizon = horizon
        self.thrusters = m
        self.aff = aff
        self.solver = BoxQpSolver(self.hessian, reg_scale=reg_scale)

    def linear_terms(self, x0: np.ndarray) -> tuple[np.ndarray, float]:
        """State-dependent (g, c0) of the condensed objective."""
        q_vec = self.state_map @ x0 + self.drift
        g = 2.0 * self.control_map.T @ (self.weight @ q_vec) + 1.0
        c0 = float(q_vec @ (self.weight @ q_vec))
        return g, c0

    def solve(
        self,
        x0: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        start: np.ndarray | None = None,
        tol: float = 1e-8,
        max_iter: int = 20_000,
    ) -> QpSolution:
        g, c0 = self.linear_terms(x0)
        return self.solver.minimize(
            g, lower, upper, constant=c0, start=start, tol=tol, max_iter=max_iter
        )


def condense(
    aff: AffineModel,
    x0: np.ndarray,
    state_weight: np.ndarray,
    horizon: int,
    bounds_per_step,
    reg_scale: float = 1e-9,
) -> BoxQp:
    """Condense the horizon problem for one state into a BoxQp.

    bounds_per_step lists, for each of the `horizon` steps, M pairs
    [low_i, high_i] bounding each thruster's duration at that step.
    """
    form = CondensedMpc(aff, state_weight, horizon, reg_scale=reg_scale)
    g, c0 = form.linear_terms(np.asarray(x0, dtype=float))
    lower, upper = _stack_bounds(bounds_per_step, horizon, form.thrusters)
    return BoxQp(hessian=form.hessian, linear=g, lower=lower, upper=upper, constant=c0)
