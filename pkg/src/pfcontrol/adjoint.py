"""Variational (tangent) and dual (adjoint) solvers for the forward scheme.

Differentiate first, then transpose: the tangent system is the exact
linearization of each discrete forward step, and the adjoint marches the
exact transposes backwards.  The resulting gradient is the gradient of
the discrete cost to rounding error, which is what makes finite
difference checks pass at 1e-6 rather than at the discretization error.

Continuous reading of the two systems, with Y and Phi the variations,
p and q the duals, theta* and phi* the linearization state:

  tangent:  Y_t - Lap(beta'(theta*) Y) + Phi_t = u_dir
            Phi_t - Lap(Phi) + (3 phi*^2 - 1) Phi = Y / theta*^2
            -d(beta'(theta*) Y)/dn = alpha (beta'(theta*) Y - v_dir), dPhi/dn = 0
            Y(0) = Phi(0) = 0
  dual:     p_t + beta'(theta*) Lap p + q / theta*^2 = -S_theta
            q_t + Lap q - (3 phi*^2 - 1) q + p_t = -S_phi
            dp/dn + alpha p = 0, dq/dn = 0, p(T) = q(T) = 0

where S_theta, S_phi are the running-cost derivatives.  Discretely both
are realized step by step; all step matrices are self-adjoint in the
trapezoid inner product, so each transpose is the same sparse solve as
the forward sweep.  Adjoint levels are labelled so that the duality
pairing sits at the control level driving each step: the terminal rows
of p and q are exactly zero, and level k of p is the exact gradient of
the cost with respect to the control slice u[k].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .convex import moreau_jprime, ConvexContext
from .grids import Grid, trapezoid_weights
from .state import ControlSet, ModelParams, StateTrajectory

__all__ = [
    "TangentPair",
    "AdjointPair",
    "AdjointSources",
    "solve_tangent",
    "build_sources",
    "solve_adjoint",
    "reduced_gradient",
]


@dataclass
class TangentPair:
    """Directional state variations: dtheta is Y, dphi is Phi, (nt+1, n) each."""

    dtheta: np.ndarray
    dphi: np.ndarray


@dataclass
class AdjointPair:
    """Dual variables: p pairs with the temperature equation, q with the phase."""

    p: np.ndarray
    q: np.ndarray


@dataclass
class AdjointSources:
    """Pointwise running-cost derivatives on every time level.

    theta_source = 2*lambda1*(theta - theta_f) + (xi - eta)/eps
    phi_source   = 2*lambda2*(phi - eta)
    eta_source   = -2*lambda2*(phi - eta) + (theta_c - theta)/eps

    xi is the subgradient of the penalty potential actually used: the
    envelope derivative clamp((theta - theta_c)/sigma) in penalized mode, a
    measurable selection from the Heaviside graph in the limit mode.  Note
    phi_source + eta_source = (theta_c - theta)/eps up to one rounding of
    the cancelled mismatch term.
    """

    theta_source: np.ndarray
    phi_source: np.ndarray
    eta_source: np.ndarray
    xi: np.ndarray


def _phi_matrix(grid: Grid, phi_k, h):
    return (sp.eye(grid.n_nodes) / h - grid.lap_neumann + sp.diags(3.0 * phi_k * phi_k)).tocsc()


def _theta_matrix(grid: Grid, robin, theta_k, h):
    d = theta_k * theta_k / (theta_k * theta_k + 1.0)  # 1 / beta'(theta)
    return (sp.diags(d / h) - robin.matrix_a).tocsc(), d


def solve_tangent(state: StateTrajectory, u_dir, v_dir) -> TangentPair:
    """Exact linearization of the forward march along (u_dir, v_dir).

    Directions are time-indexed like the controls; the indicator eta has no
    state response, so it has no direction here.  The map is linear: doubling
    the direction doubles the output bit for bit.
    """
    grid, robin, h = state.grid, state.robin, state.h
    nt = state.nt
    u_dir = np.asarray(u_dir, dtype=float)
    v_dir = np.asarray(v_dir, dtype=float)
    if u_dir.shape != state.theta.shape:
        raise ValueError(f"u_dir must have shape {state.theta.shape}")
    if v_dir.shape != (nt + 1, grid.n_boundary):
        raise ValueError(f"v_dir must have shape {(nt + 1, grid.n_boundary)}")

    y = np.zeros_like(state.theta)
    f = np.zeros_like(state.phi)
    for k in range(1, nt + 1):
        theta_prev = state.theta[k - 1]
        mphi = _phi_matrix(grid, state.phi[k], h)
        rhs = (1.0 / h + 1.0) * f[k - 1] + y[k - 1] / (theta_prev * theta_prev)
        f[k] = spla.spsolve(mphi, rhs)
        mth, d = _theta_matrix(grid, robin, state.theta[k], h)
        rhs2 = y[k - 1] / h - (f[k] - f[k - 1]) / h + u_dir[k - 1] + robin.matrix_b @ v_dir[k - 1]
        y[k] = d * spla.spsolve(mth, rhs2)
    return TangentPair(dtheta=y, dphi=f)


def build_sources(
    state: StateTrajectory,
    controls: ControlSet,
    params: ModelParams,
    eps: float,
    sigma: float | None = None,
    selection_at_theta_c: float = 0.0,
) -> AdjointSources:
    """Running-cost derivatives for the penalized (sigma given) or limit mode.

    eps may be inf, which switches the graph penalty off entirely.  In the
    limit mode xi is sign(theta - theta_c) with `selection_at_theta_c`
    (default 0, any value in [-1, 1]) exactly on the transition set.
    """
    if not (eps > 0.0):
        raise ValueError("eps must be positive (inf allowed)")
    inv_eps = 0.0 if np.isinf(eps) else 1.0 / eps
    theta, phi, eta = state.theta, state.phi, controls.eta
    if eta.shape != theta.shape:
        raise ValueError("eta must be indexed like the state")
    if sigma is not None:
        ctx = ConvexContext(params.theta_c)
        xi = moreau_jprime(ctx, theta, sigma)
    else:
        if abs(selection_at_theta_c) > 1.0:
            raise ValueError("selection at theta_c must lie in [-1, 1]")
        xi = np.sign(theta - params.theta_c)
        if selection_at_theta_c != 0.0:
            xi = np.where(theta == params.theta_c, selection_at_theta_c, xi)
    theta_f = params.theta_f_field(state.grid)
    mismatch = 2.0 * params.lambda2 * (phi - eta)
    return AdjointSources(
        theta_source=2.0 * params.lambda1 * (theta - theta_f) + inv_eps * (xi - eta),
        phi_source=mismatch,
        eta_source=-mismatch + inv_eps * (params.theta_c - theta),
        xi=xi,
    )


def solve_adjoint(state: StateTrajectory, sources: AdjointSources) -> AdjointPair:
    """Backward dual sweep; exact transpose of the tangent propagator.

    Within each backward slot the temperature transpose runs first and its
    multiplier feeds the phase transpose (that is where the p_t term of the
    continuous phase dual lives).  Terminal rows are exactly zero, and the
    duality identity

      sum_Q theta_source*Y + sum_Q phi_source*Phi
          = sum_Q u_dir*p + sum_Sigma alpha*v_dir*p

    holds to rounding for every direction, with all sums trapezoid-weighted.
    """
    grid, robin, h = state.grid, state.robin, state.h
    nt = state.nt
    i1 = np.asarray(sources.theta_source, dtype=float)
    i2 = np.asarray(sources.phi_source, dtype=float)
    if i1.shape != state.theta.shape or i2.shape != state.theta.shape:
        raise ValueError(f"sources must have shape {state.theta.shape}")

    tau = trapezoid_weights(nt + 1, h)
    p = np.zeros_like(state.theta)
    q = np.zeros_like(state.theta)
    # Accumulated sensitivities of the weighted cost to (Y_k, Phi_k).
    yhat = tau[nt] * i1[nt]
    fhat = tau[nt] * i2[nt]
    for k in range(nt, 0, -1):
        theta_prev = state.theta[k - 1]
        mth, d = _theta_matrix(grid, robin, state.theta[k], h)
        rhat = spla.spsolve(mth, d * yhat)
        mphi = _phi_matrix(grid, state.phi[k], h)
        shat = spla.spsolve(mphi, fhat - rhat / h)
        p[k - 1] = rhat / tau[k - 1]
        q[k - 1] = shat / tau[k - 1]
        yhat = rhat / h + shat / (theta_prev * theta_prev) + tau[k - 1] * i1[k - 1]
        fhat = rhat / h + (1.0 / h + 1.0) * shat + tau[k - 1] * i2[k - 1]
    return AdjointPair(p=p, q=q)


def reduced_gradient(
    state: StateTrajectory,
    adjoint: AdjointPair,
    sources: AdjointSources,
    controls: ControlSet,
    params: ModelParams,
    anchors: ControlSet | None = None,
):
    """Pointwise cost gradient in the three control slots.

    Limit mode (no anchors): (p, alpha*p on the boundary, eta_source).
    Penalized mode adds the quadratic anchor pull 2*(c - anchor) slotwise;
    the sources must then have been built with the matching sigma.
    Returns (g_u, g_v, g_eta) shaped like the controls.
    """
    grid = state.grid
    g_u = adjoint.p.copy()
    g_v = state.robin.alpha[None, :] * adjoint.p[:, grid.boundary_index]
    g_eta = np.asarray(sources.eta_source, dtype=float).copy()
    if anchors is not None:
        if anchors.u.shape != controls.u.shape or anchors.v.shape != controls.v.shape:
            raise ValueError("anchor controls must be indexed like the controls")
        g_u += 2.0 * (controls.u - anchors.u)
        g_v += 2.0 * (controls.v - anchors.v)
        g_eta += 2.0 * (controls.eta - anchors.eta)
    return g_u, g_v, g_eta
