"""Forward solver tests: stationary fidelity, positivity, balance, stability.

Single steps are checked against scipy.optimize.fsolve applied to the
untransformed residuals (temperature solved directly in theta, not in the
internal w = beta(theta) variable).
"""

import numpy as np
import pytest
from scipy.optimize import fsolve

from pfcontrol.convex import beta
from pfcontrol.grids import Grid, RobinOperator, integrate_omega, trapezoid_weights
from pfcontrol.state import (
    ControlSet,
    InitialData,
    ModelParams,
    NewtonError,
    StateTrajectory,
    StepFailure,
    check_admissible,
    solve_state,
    step_phi,
    step_theta,
)


def make_problem(n=9, nt=8, T=1.0, theta_c=1.0, extent=1.0, alpha=1.0,
                 u_box=0.05, v_box=0.1, lambda1=1.0, lambda2=1.0, theta_f=1.0):
    grid = Grid((extent,), (n,))
    robin = RobinOperator(grid, alpha)
    params = ModelParams(
        theta_c=theta_c, lambda1=lambda1, lambda2=lambda2, theta_f=theta_f,
        u_min=-u_box, u_max=u_box, v_min=-v_box, v_max=v_box, T=T, nt=nt,
    )
    return grid, robin, params


class TestParamsAndData:
    def test_params_validation(self):
        kw = dict(theta_c=1.0, lambda1=1.0, lambda2=1.0, theta_f=1.0,
                  u_min=-1.0, u_max=1.0, v_min=-1.0, v_max=1.0, T=1.0, nt=4)
        ModelParams(**kw)
        for bad in (
            dict(kw, theta_c=0.0),
            dict(kw, lambda1=-1.0),
            dict(kw, u_min=2.0),
            dict(kw, v_max=-2.0),
            dict(kw, T=0.0),
            dict(kw, nt=0),
        ):
            with pytest.raises(ValueError):
                ModelParams(**bad)

    def test_theta_f_field_shapes(self):
        grid, _, params = make_problem(n=5, nt=3)
        assert params.theta_f_field(grid).shape == (4, 5)
        params.theta_f = np.asarray(np.linspace(1, 2, 5))
        assert params.theta_f_field(grid).shape == (4, 5)
        params.theta_f = np.ones((4, 5))
        assert params.theta_f_field(grid).shape == (4, 5)
        params.theta_f = np.ones((3, 5))
        with pytest.raises(ValueError):
            params.theta_f_field(grid)

    def test_initial_data_validation(self):
        with pytest.raises(ValueError):
            InitialData(theta0=np.array([1.0, 0.0]), phi0=np.zeros(2))
        with pytest.raises(ValueError):
            InitialData(theta0=np.array([1.0, np.nan]), phi0=np.zeros(2))
        with pytest.raises(ValueError):
            InitialData(theta0=np.ones(3), phi0=np.zeros(2))

    def test_controls_and_admissibility(self):
        grid, _, params = make_problem(n=5, nt=3)
        ctl = ControlSet.constant(grid, params.nt, 0.01, -0.05, 1.0)
        assert ctl.u.shape == (4, 5)
        assert ctl.v.shape == (4, 2)
        check_admissible(ctl, params)
        ctl2 = ctl.copy()
        ctl2.u[0, 0] = 99.0
        assert ctl.u[0, 0] == 0.01  # copies are independent
        with pytest.raises(ValueError):
            check_admissible(ctl2, params)
        ctl3 = ctl.copy()
        ctl3.eta[:] = 1.5
        with pytest.raises(ValueError):
            check_admissible(ctl3, params)


class TestSingleSteps:
    def test_phi_stationary_points(self):
        grid = Grid((1.0,), (6,))
        theta = np.full(6, 1.3)
        for c in (0.0, 1.0, -1.0):
            phi_new, iters = step_phi(grid, np.full(6, c), theta, 1.3, 0.1)
            assert np.array_equal(phi_new, np.full(6, c))
            assert iters == 0

    def test_phi_against_dense_root_finder(self):
        grid = Grid((1.0,), (4,))
        rng = np.random.default_rng(0)
        phi_old = rng.uniform(-1, 1, 4)
        theta_old = rng.uniform(0.5, 2.0, 4)
        h, theta_c = 0.05, 1.0
        phi_new, _ = step_phi(grid, phi_old, theta_old, theta_c, h)
        lap = grid.lap_neumann.toarray()
        source = phi_old + 1.0 / theta_c - 1.0 / theta_old

        def res(p):
            return (p - phi_old) / h - lap @ p + p**3 - source

        want = fsolve(res, phi_old, xtol=1e-13)
        assert np.max(np.abs(phi_new - want)) < 1e-9

    def test_theta_stationary(self):
        grid = Grid((1.0,), (6,))
        robin = RobinOperator(grid, 1.0)
        theta_c = 1.4
        th = np.full(6, theta_c)
        phi = np.zeros(6)
        v = np.full(2, beta(theta_c))
        theta_new, _ = step_theta(grid, robin, th, phi, phi, np.zeros(6), v, 0.1)
        assert np.max(np.abs(theta_new - theta_c)) < 1e-12

    def test_theta_mean_rise_matches_balance(self):
        # with matched boundary data and frozen phi, mean theta rises by ~c*h
        grid = Grid((1.0,), (21,))
        robin = RobinOperator(grid, 1.0)
        th = np.ones(21)
        phi = np.zeros(21)
        c, h = 0.04, 1e-3
        u = np.full(21, c)
        v = np.full(2, beta(1.0))
        theta_new, _ = step_theta(grid, robin, th, phi, phi, u, v, h)
        rise = integrate_omega(grid, theta_new - th)
        # the wall flux reacts to the heated boundary at O(h), hence the slack
        assert abs(rise - c * h) < 0.01 * c * h

    def test_theta_against_dense_root_finder(self):
        # oracle solves the same step directly in theta, no beta transform
        grid = Grid((1.0,), (4,))
        robin = RobinOperator(grid, np.array([0.7, 1.9]))
        rng = np.random.default_rng(1)
        theta_old = rng.uniform(0.8, 1.5, 4)
        phi_old = rng.uniform(-0.5, 0.5, 4)
        phi_new = phi_old + rng.uniform(-0.05, 0.05, 4)
        u = rng.uniform(-0.05, 0.05, 4)
        v = rng.uniform(-0.1, 0.1, 2)
        h = 0.05
        got, _ = step_theta(grid, robin, theta_old, phi_old, phi_new, u, v, h)
        a = robin.matrix_a.toarray()
        b = robin.matrix_b.toarray()

        def res(th):
            th = np.abs(th)  # keep the oracle in the valid branch
            return (th - theta_old) / h - a @ (th - 1.0 / th) + (phi_new - phi_old) / h - u - b @ v

        want = np.abs(fsolve(res, theta_old, xtol=1e-13))
        assert np.max(np.abs(got - want)) < 1e-9

    def test_positive_theta_old_required(self):
        grid = Grid((1.0,), (4,))
        robin = RobinOperator(grid, 1.0)
        bad = np.array([1.0, -0.1, 1.0, 1.0])
        with pytest.raises(ValueError):
            step_phi(grid, np.zeros(4), bad, 1.0, 0.1)
        with pytest.raises(ValueError):
            step_theta(grid, robin, bad, np.zeros(4), np.zeros(4), np.zeros(4), np.zeros(2), 0.1)


class TestSolveState:
    def test_stationary_trajectories(self):
        for theta_c in (1.0, 1.7):
            for phi0 in (0.0, 1.0, -1.0):
                grid, robin, params = make_problem(n=8, nt=64, theta_c=theta_c,
                                                   v_box=max(1.0, abs(beta(theta_c))))
                init = InitialData(np.full(8, theta_c), np.full(8, phi0))
                ctl = ControlSet.constant(grid, 64, 0.0, beta(theta_c), 0.0)
                traj = solve_state(grid, robin, params, init, ctl)
                assert np.max(np.abs(traj.theta - theta_c)) < 1e-10
                assert np.max(np.abs(traj.phi - phi0)) < 1e-10

    def test_positivity_and_balance_at_box_corners(self):
        rng = np.random.default_rng(12)
        grid, robin, params = make_problem(n=10, nt=10)
        for _ in range(20):
            u = np.where(rng.random((11, 10)) < 0.5, params.u_min, params.u_max)
            v = np.where(rng.random((11, 2)) < 0.5, params.v_min, params.v_max)
            eta = np.where(rng.random((11, 10)) < 0.5, -1.0, 1.0)
            init = InitialData(rng.uniform(0.5, 1.5, 10), rng.uniform(-1, 1, 10))
            traj = solve_state(grid, robin, params, init, ControlSet(u, v, eta))
            assert traj.min_theta.min() > 0.0
            assert traj.balance_residual.max() <= 1e-9

    def test_allen_cahn_energy_decreases(self):
        # phase step alone, theta pinned at theta_c: interface energy shrinks
        grid = Grid((1.0,), (24,))
        (h,) = grid.spacing
        rng = np.random.default_rng(3)
        phi = rng.uniform(-1.2, 1.2, 24)
        theta = np.ones(24)

        def energy(p):
            grad = float(np.sum((np.diff(p) / h) ** 2) * h)
            return 0.5 * grad + float(grid.omega @ ((p * p - 1.0) ** 2 / 4.0))

        e = energy(phi)
        for _ in range(30):
            phi, _ = step_phi(grid, phi, theta, 1.0, 0.05)
            e_new = energy(phi)
            assert e_new <= e + 1e-12
            e = e_new

    def test_continuous_dependence_probe(self):
        grid, robin, params = make_problem(n=12, nt=12)
        init = InitialData(np.full(12, 1.1), np.zeros(12))
        base = ControlSet.constant(grid, 12, 0.0, 0.0, 0.0)
        ref = solve_state(grid, robin, params, init, base)
        tau = trapezoid_weights(13, params.h)
        wq = tau[:, None] * grid.omega[None, :]
        prev_diff = None
        prev_ratio = None
        for delta in (1e-2, 5e-3, 2.5e-3):
            ctl = base.copy()
            ctl.u = ctl.u + delta
            traj = solve_state(grid, robin, params, init, ctl)
            diff = float(np.sum(wq * (traj.theta - ref.theta) ** 2))
            ratio = diff / np.sqrt(np.sum(wq * ctl.u**2))
            if prev_diff is not None:
                assert diff < prev_diff
                assert ratio < 10 * prev_ratio  # bounded, not exploding
            prev_diff, prev_ratio = diff, ratio

    def test_cap_monitoring_is_not_fatal(self):
        grid, robin, params = make_problem(n=8, nt=4)
        init = InitialData(np.full(8, 1.2), np.zeros(8))
        ctl = ControlSet.constant(grid, 4, 0.0, 0.0, 0.0)
        traj = solve_state(grid, robin, params, init, ctl,
                           theta_sup_cap=0.1, theta_inv_cap=0.1)
        assert len(traj.cap_violations) == 2 * 4  # both caps trip every step
        steps = {step for step, _, _ in traj.cap_violations}
        assert steps == {1, 2, 3, 4}
        kinds = {kind for _, kind, _ in traj.cap_violations}
        assert kinds == {"theta_sup", "theta_inv"}

    def test_step_failure_carries_context(self):
        grid, robin, params = make_problem(n=8, nt=4)
        init = InitialData(np.full(8, 1.5), np.zeros(8))  # off-stationary
        ctl = ControlSet.constant(grid, 4, 0.0, 0.0, 0.0)
        with pytest.raises(StepFailure) as info:
            solve_state(grid, robin, params, init, ctl, newton_max_iter=0)
        assert info.value.step == 1
        assert info.value.equation == "phase"
        assert isinstance(info.value.cause, NewtonError)

    def test_shape_and_admissibility_guards(self):
        grid, robin, params = make_problem(n=8, nt=4)
        init = InitialData(np.full(8, 1.0), np.zeros(8))
        good = ControlSet.constant(grid, 4, 0.0, 0.0, 0.0)
        bad_shape = ControlSet(good.u[:3], good.v, good.eta)
        with pytest.raises(ValueError):
            solve_state(grid, robin, params, init, bad_shape)
        bad_box = good.copy()
        bad_box.u[:] = 1.0
        with pytest.raises(ValueError):
            solve_state(grid, robin, params, init, bad_box)

    def test_diagnostics_recorded(self):
        grid, robin, params = make_problem(n=8, nt=5)
        init = InitialData(np.full(8, 1.05), np.zeros(8))
        ctl = ControlSet.constant(grid, 5, 0.02, 0.0, 0.0)
        traj = solve_state(grid, robin, params, init, ctl)
        assert isinstance(traj, StateTrajectory)
        assert traj.nt == 5
        assert traj.theta.shape == (6, 8)
        assert traj.min_theta.shape == (6,)
        assert traj.newton_iters_phi.shape == (5,)
        assert np.all(traj.newton_iters_theta >= 1)
        assert np.array_equal(traj.times(), np.arange(6) * params.h)
