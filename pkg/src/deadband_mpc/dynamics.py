"""Orbital dynamics: frames, target orbit, full nonlinear relative motion,
the Clohessy-Wiltshire (CW) linear model, its exact pulse-width
discretization, and the affine model used by the controller.

Two models live here. The full model integrates Newtonian two-body gravity
for chaser and target in the ECI frame and expresses the relative motion in
LVLH axes; it is the simulation plant. The CW model linearizes that motion
about the circular target orbit; it is the controller's internal model.

All operations are pure functions of their arguments; every type is
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioConfig, _frozen_array


class FatalNumericError(RuntimeError):
    """Raised when a computation leaves the domain where results are meaningful."""


@dataclass(frozen=True)
class TargetOrbit:
    """Circular target orbit: angular rate omega (rad/s) and radius (m).

    The LVLH-frame angular velocity is [0, -omega, 0]: the frame rotates
    about its own -y axis because y points along the negative orbit normal
    (z toward Earth, x along velocity). That vector, not the rate alone, is
    what enters the Coriolis and centrifugal terms of the relative dynamics.
    """

    omega: float
    radius: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")

    @property
    def omega_lvlh(self) -> np.ndarray:
        return np.array([0.0, -self.omega, 0.0])

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


def make_target_orbit(cfg: ScenarioConfig) -> TargetOrbit:
    """Target orbit derived from the scenario constants; omega is never stored."""
    return TargetOrbit(omega=cfg.orbital_rate, radius=cfg.target_orbit_radius)


def target_pose(orbit: TargetOrbit, t: float) -> tuple[np.ndarray, np.ndarray]:
    """ECI position of the target and the LVLH-to-ECI rotation at time t.

    The orbital plane is aligned with the ECI zx-plane; the rotation matrix
    columns are the LVLH axes expressed in ECI coordinates.
    """
    wt = orbit.omega * t
    c, s = math.cos(wt), math.sin(wt)
    r_target_eci = orbit.radius * np.array([c, 0.0, s])
    rotation = np.array(
        [
            [-s, 0.0, -c],
            [0.0, 1.0, 0.0],
            [c, 0.0, -s],
        ]
    )
    return r_target_eci, rotation


def full_dynamics_rhs(
    cfg: ScenarioConfig,
    orbit: TargetOrbit,
    t: float,
    x: np.ndarray,
    u: np.ndarray,
) -> np.ndarray:
    """Time derivative of the full nonlinear relative state.

    Parameters
    ----------
    t : float
        Absolute time (s), fixing the target's position on its orbit.
    x : ndarray, shape (6,)
        LVLH state [r; v].
    u : ndarray, shape (3,)
        Net actuation force on the chaser, expressed in LVLH axes (N).

    Returns
    -------
    ndarray, shape (6,)
        [v; a] with a the LVLH relative acceleration: Coriolis and
        centrifugal terms of the rotating frame plus the ECI two-body
        acceleration difference between chaser and target, rotated into
        LVLH, with the thrust acceleration folded in.
    """
    r = x[:3]
    v = x[3:]
    r_target_eci, rotation = target_pose(orbit, t)
    r_chaser_eci = rotation @ r + r_target_eci
    chaser_dist = np.linalg.norm(r_chaser_eci)
    if chaser_dist == 0.0:
        raise FatalNumericError("chaser position coincides with Earth's center")
    # Both two-body terms use the computed norms so the origin is an exact
    # equilibrium regardless of rounding in the target ephemeris.
    target_dist = np.linalg.norm(r_target_eci)
    acc_chaser = -cfg.mu / chaser_dist**3 * r_chaser_eci + (rotation @ u) / cfg.chaser_mass
    acc_target = -cfg.mu / target_dist**3 * r_target_eci
    w = orbit.omega_lvlh
    a_rel = -2.0 * np.cross(w, v) - np.cross(w, np.cross(w, r)) + rotation.T @ (acc_chaser - acc_target)
    return np.concatenate([v, a_rel])


def cw_state_matrix(omega: float) -> np.ndarray:
    """Continuous-time CW system matrix for the [r; v] LVLH state convention."""
    a = np.zeros((6, 6))
    a[0, 3] = 1.0
    a[1, 4] = 1.0
    a[2, 5] = 1.0
    a[3, 5] = 2.0 * omega
    a[4, 1] = -(omega**2)
    a[5, 2] = 3.0 * omega**2
    a[5, 3] = -2.0 * omega
    return a


@dataclass(frozen=True)
class CwModel:
    """CW linear model: x' = A x + B u with B = (1/m_C) [0; I]."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    omega: float
    chaser_mass: float

    def __post_init__(self):
        object.__setattr__(self, "a_matrix", _frozen_array(self.a_matrix, (6, 6)))
        object.__setattr__(self, "b_matrix", _frozen_array(self.b_matrix, (6, 3)))


def make_cw_model(cfg: ScenarioConfig) -> CwModel:
    omega = cfg.orbital_rate
    b = np.zeros((6, 3))
    b[3:, :] = np.eye(3) / cfg.chaser_mass
    return CwModel(a_matrix=cw_state_matrix(omega), b_matrix=b, omega=omega, chaser_mass=cfg.chaser_mass)


def transition_closed_form(omega: float, t: float) -> np.ndarray:
    """Closed-form CW state transition matrix e^{At}, analytic in t."""
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    wt = omega * t
    c, s = math.cos(wt), math.sin(wt)
    return np.array(
        [
            [1.0, 0.0, 6.0 * (wt - s), 4.0 * s / omega - 3.0 * t, 0.0, 2.0 * (1.0 - c) / omega],
            [0.0, c, 0.0, 0.0, s / omega, 0.0],
            [0.0, 0.0, 4.0 - 3.0 * c, 2.0 * (c - 1.0) / omega, 0.0, s / omega],
            [0.0, 0.0, 6.0 * omega * (1.0 - c), 4.0 * c - 3.0, 0.0, 2.0 * s],
            [0.0, -omega * s, 0.0, 0.0, c, 0.0],
            [0.0, 0.0, 3.0 * omega * s, -2.0 * s, 0.0, c],
        ]
    )


# Degree-13 diagonal Pade coefficients and its validity radius in the 1-norm.
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def matrix_exponential(a: np.ndarray) -> np.ndarray:
    """Dense matrix exponential by scaling-and-squaring with a degree-13
    diagonal Pade approximant. Intended for the small matrices of this
    package (n <= 16)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix_exponential needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > 16:
        raise ValueError(f"matrix_exponential supports n <= 16, got n = {n}")
    if not np.isfinite(a).all():
        raise FatalNumericError("matrix_exponential: non-finite entries")

    norm = np.abs(a).sum(axis=0).max() if n else 0.0
    if norm == 0.0:
        return np.eye(n)
    squarings = 0 if norm <= _THETA13 else int(math.ceil(math.log2(norm / _THETA13)))
    a_scaled = a / (2.0**squarings)

    b = _PADE13
    eye = np.eye(n)
    a2 = a_scaled @ a_scaled
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a_scaled @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye
    )
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    result = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        result = result @ result
        if not np.isfinite(result).all():
            raise FatalNumericError("matrix_exponential: overflow while squaring")
    return result


def grammian(model: CwModel, s: float) -> np.ndarray:
    """Input-integration matrix G(s) = int_0^s e^{-A tau} d tau.

    Computed as the upper-right block of the exponential of the augmented
    matrix [[-A, I], [0, 0]] scaled by s, which is exact up to the matrix
    exponential itself.
    """
    aug = np.zeros((12, 12))
    aug[:6, :6] = -model.a_matrix
    aug[:6, 6:] = np.eye(6)
    return matrix_exponential(aug * s)[:6, 6:]


def exact_step(
    model: CwModel,
    x: np.ndarray,
    durations: np.ndarray,
    h: float,
    thrust_forces: np.ndarray,
) -> np.ndarray:
    """Exact discrete step of the CW model under rectangular thruster pulses.

    Each thruster i applies its constant force for the first durations[i]
    seconds of the interval and is silent for the rest. Valid for any
    durations in [0, h]; the deadband is a property of the control set, not
    of this map.
    """
    durations = np.asarray(durations, dtype=float)
    phi = matrix_exponential(model.a_matrix * h)
    forced = np.zeros(6)
    for s_i, f_i in zip(durations, np.asarray(thrust_forces, dtype=float)):
        forced += grammian(model, s_i) @ (model.b_matrix @ f_i)
    return phi @ x + phi @ forced


@dataclass(frozen=True)
class AffineModel:
    """Discrete-time affine control model x[k+1] = Phi x[k] + Gamma s[k] + d.

    Exact for the unforced motion and to first order in the pulse durations
    around the linearization point s0; exactly equal to the pulse-width
    discretization when every duration is s0.
    """

    phi: np.ndarray  # (6, 6) transition over one sampling period
    gamma: np.ndarray  # (6, M) per-thruster duration sensitivities
    d: np.ndarray  # (6,) constant drift from the linearization
    s0: float
    h: float
    impulse_columns: np.ndarray  # (6, M) columns B f_i
    cw: CwModel

    def __post_init__(self):
        m = self.gamma.shape[1] if self.gamma.ndim == 2 else -1
        object.__setattr__(self, "phi", _frozen_array(self.phi, (6, 6)))
        object.__setattr__(self, "gamma", _frozen_array(self.gamma, (6, m)))
        object.__setattr__(self, "d", _frozen_array(self.d, (6,)))
        object.__setattr__(self, "impulse_columns", _frozen_array(self.impulse_columns, (6, m)))

    @property
    def thruster_count(self) -> int:
        return self.gamma.shape[1]

    def step(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        return self.phi @ x + self.gamma @ s + self.d

    def grammian(self, s: float) -> np.ndarray:
        return grammian(self.cw, s)


def linearize_actuation(model: CwModel, cfg: ScenarioConfig) -> AffineModel:
    """Affine-in-duration model obtained by linearizing G about s0.

    Gamma = e^{A(h-s0)} [B f_1 ... B f_M];
    d     = e^{Ah} (G(s0) - s0 e^{-A s0}) sum_i B f_i.

    The drift d vanishes both at s0 = 0 and whenever the thrust table sums
    to zero, as with symmetric back-to-back thruster pairs.
    """
    h = cfg.sampling_period
    s0 = cfg.linearization_point
    impulse = model.b_matrix @ cfg.thrust_forces.T  # (6, M)
    phi = matrix_exponential(model.a_matrix * h)
    gamma = matrix_exponential(model.a_matrix * (h - s0)) @ impulse
    d = phi @ (grammian(model, s0) - s0 * matrix_exponential(-model.a_matrix * s0)) @ impulse.sum(axis=1)
    return AffineModel(
        phi=phi, gamma=gamma, d=d, s0=s0, h=h, impulse_columns=impulse, cw=model
    )


def make_affine_model(cfg: ScenarioConfig) -> AffineModel:
    """Controller model for a scenario: CW matrices plus actuator linearization."""
    return linearize_actuation(make_cw_model(cfg), cfg)
