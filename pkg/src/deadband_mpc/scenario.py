"""Scenario configuration and shared state types for the rendezvous toolkit.

All quantities are SI (m, s, kg, N, rad). The chaser state lives in the
LVLH frame of the target: z points from the target toward the Earth's
center, x along the target's velocity, y completes the triad.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class SolverId(str, Enum):
    """Thrust-allocation solvers selectable in a scenario."""

    STANDARD = "standard"
    PROJECTED = "projected"
    RELAXED = "relaxed"
    ORACLE = "oracle"


def _frozen_array(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LvlhState:
    """Relative chaser state: position r (m) and velocity v (m/s) in LVLH axes."""

    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", _frozen_array(self.r, (3,)))
        object.__setattr__(self, "v", _frozen_array(self.v, (3,)))
        if not (np.isfinite(self.r).all() and np.isfinite(self.v).all()):
            raise ValueError("LvlhState components must be finite")

    @classmethod
    def from_vector(cls, x) -> "LvlhState":
        x = np.asarray(x, dtype=float)
        if x.shape != (6,):
            raise ValueError(f"state vector must have shape (6,), got {x.shape}")
        return cls(x[:3], x[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])


def default_thrust_forces() -> np.ndarray:
    """Six identical 1000 N thrusters, one aligned with each LVLH semi-axis."""
    axes = np.vstack([np.eye(3), -np.eye(3)])
    return 1000.0 * axes


@dataclass(frozen=True)
class ScenarioConfig:
    """Single source of truth for one closed-loop run.

    Defaults reproduce the reference low-Earth-orbit rendezvous scenario:
    a 2000 kg chaser with six 1000 N axis-aligned thrusters approaching a
    target on a circular orbit of radius 7171 km, starting 100 km below it.
    """

    gravitational_constant: float = 6.674e-11  # m^3 kg^-1 s^-2
    earth_mass: float = 5.972e24  # kg
    target_orbit_radius: float = 7.171e6  # m
    chaser_mass: float = 2000.0  # kg
    thrust_forces: np.ndarray = field(default_factory=default_thrust_forces)  # (M, 3) N, LVLH
    state_weight: np.ndarray = field(default_factory=lambda: np.eye(6))  # terminal-state weight
    min_activation: float = 5.0  # s, deadband threshold (0 disables the deadband)
    sampling_period: float = 10.0  # s
    sim_duration: float = 3600.0  # s
    linearization_point: float = 5.0  # s, pulse duration the affine model is exact at
    initial_state: LvlhState = field(
        default_factory=lambda: LvlhState(np.array([0.0, 0.0, 100e3]), np.zeros(3))
    )
    horizon: int = 10  # MPC steps
    solver_id: SolverId = SolverId.RELAXED
    qp_tolerance: float = 1e-8
    qp_max_iterations: int = 20_000
    qp_regularization_scale: float = 1e-9  # Tikhonov epsilon = scale * (1 + ||H||_inf)
    bnb_gap_tolerance: float = 1e-6  # relative optimality gap for branch-and-bound
    bnb_node_budget: int = 10_000
    rk_max_step: float = 0.5  # s, RK4 sub-step ceiling in the nonlinear simulator
    rng_seed: int = 0
    initial_state_jitter: float = 0.0  # m (position std); velocity std is 1e-3 of this

    def __post_init__(self):
        forces = np.array(self.thrust_forces, dtype=float)
        if forces.ndim != 2 or forces.shape[1] != 3 or forces.shape[0] < 1:
            raise ValueError("thrust_forces must be an (M, 3) table with M >= 1")
        forces.flags.writeable = False
        object.__setattr__(self, "thrust_forces", forces)
        object.__setattr__(self, "state_weight", _frozen_array(self.state_weight, (6, 6)))
        object.__setattr__(self, "solver_id", SolverId(self.solver_id))
        self._validate()

    def _validate(self):
        positive = {
            "gravitational_constant": self.gravitational_constant,
            "earth_mass": self.earth_mass,
            "target_orbit_radius": self.target_orbit_radius,
            "chaser_mass": self.chaser_mass,
            "sampling_period": self.sampling_period,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if self.sim_duration < 0:
            raise ValueError(f"sim_duration must be >= 0, got {self.sim_duration}")
        if self.min_activation < 0:
            raise ValueError(f"min_activation must be >= 0, got {self.min_activation}")
        if self.min_activation > self.sampling_period:
            raise ValueError(
                f"min_activation exceeds sampling_period: "
                f"h_min = {self.min_activation} > h = {self.sampling_period}"
            )
        if not 0 <= self.linearization_point <= self.sampling_period:
            raise ValueError(
                f"linearization_point must lie in [0, h], got {self.linearization_point}"
            )
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.qp_tolerance <= 0:
            raise ValueError(f"qp_tolerance must be > 0, got {self.qp_tolerance}")
        if self.qp_max_iterations < 1 or self.bnb_node_budget < 1:
            raise ValueError("qp_max_iterations and bnb_node_budget must be >= 1")
        if not 0 <= self.bnb_gap_tolerance < 1:
            raise ValueError(f"bnb_gap_tolerance must lie in [0, 1), got {self.bnb_gap_tolerance}")
        if self.rk_max_step <= 0:
            raise ValueError(f"rk_max_step must be > 0, got {self.rk_max_step}")
        if self.initial_state_jitter < 0:
            raise ValueError("initial_state_jitter must be >= 0")
        if np.any(np.linalg.norm(self.thrust_forces, axis=1) == 0.0):
            raise ValueError("every thrust force must be nonzero")
        weight = self.state_weight
        if not np.allclose(weight, weight.T, atol=1e-12, rtol=0.0):
            raise ValueError("state_weight must be symmetric")
        try:
            np.linalg.cholesky(weight)
        except np.linalg.LinAlgError as exc:
            raise ValueError("state_weight must be positive definite") from exc

    @property
    def thruster_count(self) -> int:
        return self.thrust_forces.shape[0]

    @property
    def mu(self) -> float:
        """Standard gravitational parameter G * m_E (m^3/s^2)."""
        return self.gravitational_constant * self.earth_mass

    @property
    def orbital_rate(self) -> float:
        """Circular-orbit angular rate of the target (rad/s), recomputed on demand."""
        return math.sqrt(self.mu / self.target_orbit_radius**3)


def default_scenario(**overrides) -> ScenarioConfig:
    """Reference scenario with optional field overrides."""
    return ScenarioConfig(**overrides)
