"""Semi-implicit forward solver for the coupled temperature/phase system.

The model on a space-time cylinder: with theta the absolute temperature,
phi the phase variable and beta(r) = -1/r + r,

    theta_t - Lap(beta(theta)) + phi_t = u        (volume control u)
    phi_t - Lap(phi) + (phi^3 - phi) = 1/theta_c - 1/theta
    -d(beta(theta))/dn = alpha*(beta(theta) - v)  (boundary control v)
    d(phi)/dn = 0

Each time step advances the phase first (implicit in the cubic, explicit
in -phi and in the temperature source: a convex splitting, so the
discrete interface energy never grows), then the temperature in the
transformed variable w = beta(theta).  Solving for w keeps theta =
beta_inverse(w) positive by construction, no matter how harsh the
controls are.  Both nonlinear systems go through a damped Newton
iteration.  The indicator control eta never enters the dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .convex import beta, beta_inverse
from .grids import Grid, RobinOperator, integrate_gamma, integrate_omega

__all__ = [
    "ModelParams",
    "InitialData",
    "ControlSet",
    "StateTrajectory",
    "NewtonError",
    "StepFailure",
    "step_phi",
    "step_theta",
    "solve_state",
    "check_admissible",
]


class NewtonError(RuntimeError):
    """Newton iteration failed; carries the last residual norm."""

    def __init__(self, message, residual_norm, iterations):
        super().__init__(f"{message} (residual {residual_norm:.3e} after {iterations} iterations)")
        self.residual_norm = residual_norm
        self.iterations = iterations


class StepFailure(RuntimeError):
    """A forward step did not converge; carries the step index."""

    def __init__(self, step, equation, cause: NewtonError):
        super().__init__(f"{equation} step {step} failed: {cause}")
        self.step = step
        self.equation = equation
        self.cause = cause


@dataclass
class ModelParams:
    """Physical and optimization parameters of one problem instance.

    theta_f is the target temperature: a scalar, a single nodal field, or
    one field per time level (nt + 1 rows).
    """

    theta_c: float
    lambda1: float
    lambda2: float
    theta_f: object
    u_min: float
    u_max: float
    v_min: float
    v_max: float
    T: float
    nt: int

    def __post_init__(self):
        if self.theta_c <= 0.0 or not np.isfinite(self.theta_c):
            raise ValueError("theta_c must be positive and finite")
        if self.lambda1 < 0.0 or self.lambda2 < 0.0:
            raise ValueError("tracking weights lambda1, lambda2 must be nonnegative")
        if self.u_min > self.u_max:
            raise ValueError("control box needs u_min <= u_max")
        if self.v_min > self.v_max:
            raise ValueError("control box needs v_min <= v_max")
        if self.T <= 0.0:
            raise ValueError("final time T must be positive")
        if self.nt < 1:
            raise ValueError("need at least one time step")
        self.theta_f = np.asarray(self.theta_f, dtype=float)

    @property
    def h(self) -> float:
        return self.T / self.nt

    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.h

    def theta_f_field(self, grid: Grid) -> np.ndarray:
        """Target temperature expanded to shape (nt + 1, n_nodes)."""
        tf = self.theta_f
        shape = (self.nt + 1, grid.n_nodes)
        if tf.ndim == 0:
            return np.full(shape, float(tf))
        if tf.shape == (grid.n_nodes,):
            return np.tile(tf, (self.nt + 1, 1))
        if tf.shape == shape:
            return tf
        raise ValueError(f"theta_f has shape {tf.shape}, expected scalar, (n,) or {shape}")


@dataclass
class InitialData:
    """Initial temperature (strictly positive) and phase fields."""

    theta0: np.ndarray
    phi0: np.ndarray

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float)
        self.phi0 = np.asarray(self.phi0, dtype=float)
        if self.theta0.shape != self.phi0.shape:
            raise ValueError("theta0 and phi0 must have the same shape")
        if not np.all(np.isfinite(self.theta0)) or not np.all(np.isfinite(self.phi0)):
            raise ValueError("initial data must be finite")
        if np.any(self.theta0 <= 0.0):
            raise ValueError("initial temperature must be strictly positive")


@dataclass
class ControlSet:
    """Time-indexed control triple.

    All three live on the nt + 1 time levels of the state.  The step from
    level k-1 to level k is driven by u[k-1] and v[k-1] (the level at the
    start of the step), so the last rows of u and v never enter the
    dynamics; they still carry their trapezoid weight in the cost.  eta is
    purely a cost-side control.
    """

    u: np.ndarray
    v: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)

    @classmethod
    def constant(cls, grid: Grid, nt: int, u=0.0, v=0.0, eta=0.0):
        return cls(
            u=np.full((nt + 1, grid.n_nodes), float(u)),
            v=np.full((nt + 1, grid.n_boundary), float(v)),
            eta=np.full((nt + 1, grid.n_nodes), float(eta)),
        )

    def copy(self):
        return ControlSet(self.u.copy(), self.v.copy(), self.eta.copy())


def check_admissible(controls: ControlSet, params: ModelParams, tol=0.0):
    """Raise unless the triple sits inside its box constraints."""
    if np.any(controls.u < params.u_min - tol) or np.any(controls.u > params.u_max + tol):
        raise ValueError("u leaves its box [u_min, u_max]")
    if np.any(controls.v < params.v_min - tol) or np.any(controls.v > params.v_max + tol):
        raise ValueError("v leaves its box [v_min, v_max]")
    if np.any(np.abs(controls.eta) > 1.0 + tol):
        raise ValueError("eta leaves [-1, 1]")


@dataclass
class StateTrajectory:
    """Forward trajectory with per-step diagnostics.

    theta and phi hold nt + 1 levels each (row 0 is the initial data).
    balance_residual is the relative defect of the discrete heat balance
      d/dt (int theta + int phi) = int u - int_Gamma alpha*(beta(theta) - v),
    one value per step; with the ghost-eliminated operators it is limited
    only by the Newton tolerance.
    """

    grid: Grid
    robin: RobinOperator
    h: float
    theta: np.ndarray
    phi: np.ndarray
    min_theta: np.ndarray
    max_theta: np.ndarray
    max_abs_phi: np.ndarray
    balance_residual: np.ndarray
    newton_iters_phi: np.ndarray
    newton_iters_theta: np.ndarray
    cap_violations: list = field(default_factory=list)

    @property
    def nt(self) -> int:
        return self.theta.shape[0] - 1

    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.h


def _damped_newton(residual, jacobian, x0, tol, max_iter, max_damping=30):
    """Newton iteration with step halving on residual increase (max-norm)."""
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    rn = float(np.max(np.abs(r))) if np.all(np.isfinite(r)) else np.inf
    iters = 0
    while rn > tol:
        if iters >= max_iter:
            raise NewtonError("Newton did not converge", rn, iters)
        dx = spla.spsolve(jacobian(x).tocsc(), -r)
        step = 1.0
        halvings = 0
        while True:
            xt = x + step * dx
            rt = residual(xt)
            rtn = float(np.max(np.abs(rt))) if np.all(np.isfinite(rt)) else np.inf
            if rtn < rn:
                break
            halvings += 1
            if halvings > max_damping:
                raise NewtonError("Newton damping exhausted", rn, iters)
            step *= 0.5
        x, r, rn = xt, rt, rtn
        iters += 1
    return x, iters


def step_phi(grid: Grid, phi_old, theta_old, theta_c, h, *, newton_tol=1e-10, newton_max_iter=50):
    """One implicit phase step; returns (phi_new, newton_iterations).

    Solves (phi - phi_old)/h - Lap(phi) + phi^3 = phi_old + 1/theta_c - 1/theta_old
    with the Neumann Laplacian.  The cubic is implicit, the destabilizing
    -phi and the temperature source are explicit.
    """
    phi_old = grid.check_field(phi_old, "phi_old")
    theta_old = grid.check_field(theta_old, "theta_old")
    if np.any(theta_old <= 0.0):
        raise ValueError("theta_old must be strictly positive")
    lap = grid.lap_neumann
    source = phi_old + 1.0 / theta_c - 1.0 / theta_old

    def residual(p):
        return (p - phi_old) / h - lap @ p + p**3 - source

    def jacobian(p):
        return sp.eye(grid.n_nodes) / h - lap + sp.diags(3.0 * p * p)

    return _damped_newton(residual, jacobian, phi_old, newton_tol, newton_max_iter)


def step_theta(
    grid: Grid,
    robin: RobinOperator,
    theta_old,
    phi_old,
    phi_new,
    u_now,
    v_now,
    h,
    *,
    newton_tol=1e-10,
    newton_max_iter=50,
):
    """One implicit temperature step; returns (theta_new, newton_iterations).

    Newton runs on the transformed unknown w = beta(theta):
      (beta_inverse(w) - theta_old)/h - Lap_Robin(w; v) + (phi_new - phi_old)/h = u,
    so the recovered temperature is positive whatever the data.
    """
    theta_old = grid.check_field(theta_old, "theta_old")
    phi_old = grid.check_field(phi_old, "phi_old")
    phi_new = grid.check_field(phi_new, "phi_new")
    u_now = grid.check_field(u_now, "u_now")
    v_now = grid.check_boundary_field(v_now, "v_now")
    if np.any(theta_old <= 0.0):
        raise ValueError("theta_old must be strictly positive")
    a, b = robin.matrix_a, robin.matrix_b
    drift = (phi_new - phi_old) / h - u_now - b @ v_now

    def residual(w):
        return (beta_inverse(w) - theta_old) / h - a @ w + drift

    def jacobian(w):
        th = beta_inverse(w)
        # d beta_inverse / dw = 1 / beta'(theta) = theta^2 / (theta^2 + 1)
        return sp.diags(th * th / (th * th + 1.0) / h) - a

    w0 = beta(theta_old)
    w, iters = _damped_newton(residual, jacobian, w0, newton_tol, newton_max_iter)
    return beta_inverse(w), iters


def solve_state(
    grid: Grid,
    robin: RobinOperator,
    params: ModelParams,
    init: InitialData,
    controls: ControlSet,
    *,
    newton_tol=1e-10,
    newton_max_iter=50,
    theta_sup_cap=None,
    theta_inv_cap=None,
) -> StateTrajectory:
    """March the coupled system over all nt steps.

    Per slot: phase step (sourced by the old temperature), then temperature
    step (sourced by the fresh phase increment).  Records min/max theta,
    max |phi|, Newton counts and the relative heat-balance defect per step.
    Optional caps on max theta and max 1/theta are monitored, not enforced:
    exceedances are appended to `cap_violations`.
    """
    theta0 = grid.check_field(init.theta0, "theta0")
    phi0 = grid.check_field(init.phi0, "phi0")
    nt, h = params.nt, params.h
    shape_u = (nt + 1, grid.n_nodes)
    if controls.u.shape != shape_u or controls.eta.shape != shape_u:
        raise ValueError(f"u and eta must have shape {shape_u}")
    if controls.v.shape != (nt + 1, grid.n_boundary):
        raise ValueError(f"v must have shape {(nt + 1, grid.n_boundary)}")
    check_admissible(controls, params)

    theta = np.empty(shape_u)
    phi = np.empty(shape_u)
    theta[0], phi[0] = theta0, phi0
    iters_phi = np.zeros(nt, dtype=int)
    iters_theta = np.zeros(nt, dtype=int)
    balance = np.zeros(nt)
    caps = []

    for k in range(1, nt + 1):
        try:
            phi[k], iters_phi[k - 1] = step_phi(
                grid, phi[k - 1], theta[k - 1], params.theta_c, h,
                newton_tol=newton_tol, newton_max_iter=newton_max_iter,
            )
        except NewtonError as err:
            raise StepFailure(k, "phase", err) from err
        try:
            theta[k], iters_theta[k - 1] = step_theta(
                grid, robin, theta[k - 1], phi[k - 1], phi[k],
                controls.u[k - 1], controls.v[k - 1], h,
                newton_tol=newton_tol, newton_max_iter=newton_max_iter,
            )
        except NewtonError as err:
            raise StepFailure(k, "temperature", err) from err

        rate = integrate_omega(grid, (theta[k] - theta[k - 1] + phi[k] - phi[k - 1]) / h)
        supply = integrate_omega(grid, controls.u[k - 1])
        wall = integrate_gamma(
            grid,
            robin.alpha * (beta(theta[k][grid.boundary_index]) - controls.v[k - 1]),
        )
        defect = abs(rate - supply + wall)
        balance[k - 1] = defect / max(1.0, abs(rate) + abs(supply) + abs(wall))

        if theta_sup_cap is not None and theta[k].max() > theta_sup_cap:
            caps.append((k, "theta_sup", float(theta[k].max())))
        if theta_inv_cap is not None and (1.0 / theta[k].min()) > theta_inv_cap:
            caps.append((k, "theta_inv", float(1.0 / theta[k].min())))

    return StateTrajectory(
        grid=grid,
        robin=robin,
        h=h,
        theta=theta,
        phi=phi,
        min_theta=theta.min(axis=1),
        max_theta=theta.max(axis=1),
        max_abs_phi=np.abs(phi).max(axis=1),
        balance_residual=balance,
        newton_iters_phi=iters_phi,
        newton_iters_theta=iters_theta,
        cap_violations=caps,
    )
