"""Dynamics tests: closed-form transition, matrix exponential, pulse
discretization, affine linearization, and the full nonlinear model, each
checked against an independent oracle (quadrature, ODE integration, finite
differences, or scipy)."""

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from deadband_mpc import (
    FatalNumericError,
    default_scenario,
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

CFG = default_scenario()
ORBIT = make_target_orbit(CFG)
CW = make_cw_model(CFG)
H = CFG.sampling_period
OMEGA = CFG.orbital_rate


def random_states(rng, count, r_scale=100e3, v_scale=100.0):
    r = rng.uniform(-1, 1, size=(count, 3))
    r *= (r_scale * rng.uniform(0, 1, size=(count, 1)) ** (1 / 3)) / np.linalg.norm(r, axis=1, keepdims=True)
    v = rng.uniform(-1, 1, size=(count, 3))
    v *= (v_scale * rng.uniform(0, 1, size=(count, 1)) ** (1 / 3)) / np.linalg.norm(v, axis=1, keepdims=True)
    return np.hstack([r, v])


class TestTargetPose:
    def test_initial_position_on_x_axis(self):
        r, _ = target_pose(ORBIT, 0.0)
        assert np.allclose(r, [7.171e6, 0.0, 0.0], rtol=0, atol=1e-6)

    def test_rotation_orthonormal(self):
        rng = np.random.default_rng(3)
        for t in rng.uniform(0, 7000, size=20):
            _, rot = target_pose(ORBIT, t)
            assert np.abs(rot.T @ rot - np.eye(3)).max() <= 1e-12
            assert np.linalg.det(rot) == pytest.approx(1.0, abs=1e-12)

    def test_orbit_radius_preserved(self):
        for t in (0.0, 123.4, 5555.5):
            r, _ = target_pose(ORBIT, t)
            assert np.linalg.norm(r) == pytest.approx(ORBIT.radius, rel=1e-12)

    def test_period_closure(self):
        # omega from Table-style constants is about 1.0397e-3 rad/s
        assert OMEGA == pytest.approx(1.0397e-3, abs=1e-6)
        r0, _ = target_pose(ORBIT, 0.0)
        r1, _ = target_pose(ORBIT, 2 * np.pi / OMEGA)
        assert np.linalg.norm(r1 - r0) <= 1e-6 * ORBIT.radius

    def test_angular_velocity_matches_rotation_rate(self):
        # R' R = skew(omega_lvlh), checked by central difference
        dt = 1e-3
        _, r_plus = target_pose(ORBIT, 100.0 + dt)
        _, r_minus = target_pose(ORBIT, 100.0 - dt)
        _, rot = target_pose(ORBIT, 100.0)
        skew = rot.T @ ((r_plus - r_minus) / (2 * dt))
        w = ORBIT.omega_lvlh
        expected = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
        assert np.abs(skew - expected).max() <= 1e-9


class TestTransitionClosedForm:
    def test_zero_time_is_identity(self):
        assert np.array_equal(transition_closed_form(OMEGA, 0.0), np.eye(6))

    def test_printed_entry(self):
        wt = OMEGA * H
        phi = transition_closed_form(OMEGA, H)
        assert phi[0, 2] == pytest.approx(6 * (wt - np.sin(wt)), rel=1e-15)

    def test_semigroup(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            t1, t2 = rng.uniform(0, 2 * H, size=2)
            lhs = transition_closed_form(OMEGA, t1) @ transition_closed_form(OMEGA, t2)
            rhs = transition_closed_form(OMEGA, t1 + t2)
            assert np.abs(lhs - rhs).max() <= 1e-10

    def test_inverse_at_negative_time(self):
        prod = transition_closed_form(OMEGA, 17.0) @ transition_closed_form(OMEGA, -17.0)
        assert np.abs(prod - np.eye(6)).max() <= 1e-12

    def test_derivative_at_zero_is_cw_matrix(self):
        dt = 1e-4
        fd = (transition_closed_form(OMEGA, dt) - transition_closed_form(OMEGA, -dt)) / (2 * dt)
        assert np.abs(fd - CW.a_matrix).max() <= 1e-8


class TestMatrixExponential:
    def test_zero_matrix(self):
        assert np.array_equal(matrix_exponential(np.zeros((5, 5))), np.eye(5))

    def test_matches_closed_form(self):
        for t in (1.0, 10.0, 100.0):
            expm = matrix_exponential(CW.a_matrix * t)
            assert np.abs(expm - transition_closed_form(OMEGA, t)).max() <= 1e-10

    def test_nilpotent(self):
        # series truncates at [[1, c], [0, 1]]; the Pade solve leaves
        # ulp-level rounding, and repeated squaring (large c) grows it by
        # about one bit per squaring
        for c, tol in ((1.0, 1e-15), (-3.5, 1e-15), (1e6, 1e-10)):
            result = matrix_exponential(np.array([[0.0, c], [0.0, 0.0]]))
            expected = np.array([[1.0, c], [0.0, 1.0]])
            assert np.abs(result - expected).max() <= tol * max(1.0, abs(c))
            assert result[1, 0] == 0.0

    def test_against_scipy(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = rng.normal(scale=rng.uniform(0.01, 5.0), size=(6, 6))
            ours = matrix_exponential(a)
            ref = scipy.linalg.expm(a)
            assert np.abs(ours - ref).max() <= 1e-11 * max(1.0, np.abs(ref).max())

    def test_rejects_large_matrices(self):
        with pytest.raises(ValueError):
            matrix_exponential(np.zeros((17, 17)))

    def test_overflow_raises(self):
        with pytest.raises(FatalNumericError):
            matrix_exponential(np.full((2, 2), 1e6))


class TestGrammian:
    def test_zero_duration(self):
        assert np.abs(grammian(CW, 0.0)).max() == 0.0

    def test_derivative_at_zero_is_identity(self):
        step = 1e-6
        fd = grammian(CW, step) / step
        assert np.abs(fd - np.eye(6)).max() <= 1e-4

    def test_against_simpson_quadrature(self):
        # independent route: composite Simpson over the closed-form e^{-A tau}
        for s in (2.5, 5.0, 10.0):
            panels = 10_000
            taus = np.linspace(0.0, s, 2 * panels + 1)
            weights = np.ones(len(taus))
            weights[1:-1:2] = 4.0
            weights[2:-1:2] = 2.0
            quad = sum(
                w * transition_closed_form(OMEGA, -tau) for w, tau in zip(weights, taus)
            ) * (s / panels / 6.0)
            assert np.abs(grammian(CW, s) - quad).max() <= 1e-9


class TestExactStep:
    def test_unforced(self):
        rng = np.random.default_rng(5)
        x = random_states(rng, 1)[0]
        phi = matrix_exponential(CW.a_matrix * H)
        stepped = exact_step(CW, x, np.zeros(CFG.thruster_count), H, CFG.thrust_forces)
        assert np.abs(stepped - phi @ x).max() <= 1e-9 * max(1.0, np.abs(phi @ x).max())

    def test_single_thruster_superposition(self):
        forces = CFG.thrust_forces[:1]
        out = exact_step(CW, np.zeros(6), np.array([H]), H, forces)
        phi = matrix_exponential(CW.a_matrix * H)
        expected = phi @ grammian(CW, H) @ (CW.b_matrix @ forces[0])
        assert np.abs(out - expected).max() <= 1e-12 * max(1.0, np.abs(expected).max())

    def test_against_ode_integration(self):
        # oracle: adaptive integration of x' = Ax + B u(t) with the
        # piecewise-constant pulse profile, segment by segment
        rng = np.random.default_rng(17)
        m = CFG.thruster_count
        for _ in range(100):
            x = random_states(rng, 1, r_scale=10e3, v_scale=20.0)[0]
            durations = np.where(rng.random(m) < 0.3, 0.0, rng.uniform(0, H, size=m))
            state = x.copy()
            boundaries = np.unique(np.concatenate([[0.0], durations, [H]]))
            boundaries = boundaries[(boundaries >= 0) & (boundaries <= H)]
            for a, b in zip(boundaries[:-1], boundaries[1:]):
                if b <= a:
                    continue
                force = CFG.thrust_forces[durations >= b].sum(axis=0)
                sol = scipy.integrate.solve_ivp(
                    lambda t, y: CW.a_matrix @ y + CW.b_matrix @ force,
                    (a, b),
                    state,
                    rtol=1e-12,
                    atol=1e-12,
                )
                state = sol.y[:, -1]
            ours = exact_step(CW, x, durations, H, CFG.thrust_forces)
            assert np.linalg.norm(ours - state) <= 1e-9 * max(1.0, np.linalg.norm(state))


class TestFullDynamics:
    def test_equilibrium_at_origin(self):
        for t in (0.0, 987.6, 4321.0):
            rhs = full_dynamics_rhs(CFG, ORBIT, t, np.zeros(6), np.zeros(3))
            assert np.abs(rhs).max() == 0.0

    def test_radial_offset_matches_cw(self):
        # linearization error at 100 km is ~|r|/R_T ~ 1.4%, inside the 2% band
        x = np.array([0.0, 0.0, 100e3, 0.0, 0.0, 0.0])
        full = full_dynamics_rhs(CFG, ORBIT, 0.0, x, np.zeros(3))
        lin = CW.a_matrix @ x
        assert np.linalg.norm(full - lin) <= 0.02 * np.linalg.norm(full)

    def test_cw_validity_within_2_percent(self):
        rng = np.random.default_rng(23)
        for x in random_states(rng, 100):
            t = rng.uniform(0, 7000)
            full = full_dynamics_rhs(CFG, ORBIT, t, x, np.zeros(3))
            lin = CW.a_matrix @ x
            assert np.linalg.norm(full - lin) <= 0.02 * np.linalg.norm(full)

    def test_thrust_acceleration(self):
        rhs = full_dynamics_rhs(CFG, ORBIT, 0.0, np.zeros(6), np.array([1000.0, 0.0, 0.0]))
        assert np.abs(rhs[3:] - [0.5, 0.0, 0.0]).max() <= 1e-12

    def test_time_shift_invariance(self):
        rng = np.random.default_rng(29)
        x = random_states(rng, 1)[0]
        a = full_dynamics_rhs(CFG, ORBIT, 0.0, x, np.array([100.0, -50.0, 20.0]))
        b = full_dynamics_rhs(CFG, ORBIT, 2345.0, x, np.array([100.0, -50.0, 20.0]))
        assert np.abs(a - b).max() <= 1e-9 * max(1.0, np.abs(a).max())


class TestLinearizeActuation:
    def test_exact_at_linearization_point(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            m = rng.integers(1, 7)
            cfg = default_scenario(thrust_forces=rng.normal(scale=600.0, size=(m, 3)))
            aff = make_affine_model(cfg)
            cw = make_cw_model(cfg)
            s0 = np.full(m, cfg.linearization_point)
            for x in random_states(rng, 5):
                lhs = aff.step(x, s0)
                rhs = exact_step(cw, x, s0, cfg.sampling_period, cfg.thrust_forces)
                assert np.linalg.norm(lhs - rhs) <= 1e-9 * max(1.0, np.linalg.norm(rhs))

    def test_zero_linearization_point(self):
        cfg = default_scenario(linearization_point=0.0)
        aff = make_affine_model(cfg)
        assert np.abs(aff.d).max() == 0.0
        phi = matrix_exponential(CW.a_matrix * H)
        assert np.allclose(aff.gamma, phi @ aff.impulse_columns, rtol=0, atol=1e-12)

    def test_symmetric_table_has_zero_drift(self):
        aff = make_affine_model(CFG)
        assert np.abs(aff.d).max() == 0.0

    def test_first_order_accuracy(self):
        # error is quadratic in the duration offset: halving it cuts the
        # defect by about 4x; require at least 3.5x
        rng = np.random.default_rng(37)
        cfg = default_scenario(thrust_forces=rng.normal(scale=800.0, size=(3, 3)))
        aff = make_affine_model(cfg)
        cw = make_cw_model(cfg)
        direction = rng.uniform(-1, 1, size=3)
        x = np.zeros(6)

        def defect(delta):
            s = np.clip(cfg.linearization_point + delta * direction, 0, cfg.sampling_period)
            return np.linalg.norm(
                aff.step(x, s) - exact_step(cw, x, s, cfg.sampling_period, cfg.thrust_forces)
            )

        assert defect(2.0) / defect(1.0) >= 3.5


class TestCwModel:
    def test_state_matrix_rows(self):
        w = OMEGA
        expected = np.array(
            [
                [0, 0, 0, 1, 0, 0],
                [0, 0, 0, 0, 1, 0],
                [0, 0, 0, 0, 0, 1],
                [0, 0, 0, 0, 0, 2 * w],
                [0, -w**2, 0, 0, 0, 0],
                [0, 0, 3 * w**2, -2 * w, 0, 0],
            ]
        )
        assert np.array_equal(CW.a_matrix, expected)

    def test_input_map(self):
        expected = np.vstack([np.zeros((3, 3)), np.eye(3)]) / CFG.chaser_mass
        assert np.array_equal(CW.b_matrix, expected)


def test_affine_model_immutable():
    aff = make_affine_model(CFG)
    with pytest.raises(ValueError):
        aff.phi[0, 0] = 2.0
