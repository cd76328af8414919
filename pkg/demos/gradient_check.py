"""Adjoint validation: duality residual and finite-difference audit.

Runs a small randomized problem, verifies that the tangent and adjoint
solvers are exact transposes of each other under the space-time
quadrature, and compares the reduced gradient in all three control
slots against central finite differences of the smoothed cost.
"""

import numpy as np

from pfcontrol import (
    ControlSet,
    Grid,
    InitialData,
    ModelParams,
    RobinOperator,
    build_sources,
    cost_J_eps_sigma,
    reduced_gradient,
    solve_adjoint,
    solve_state,
    solve_tangent,
    trapezoid_weights,
)
from pfcontrol.adjoint import AdjointSources

n, nt = 8, 5
grid = Grid((1.0,), (n,))
robin = RobinOperator(grid, 1.0)
params = ModelParams(theta_c=1.0, lambda1=1.0, lambda2=1.0, theta_f=1.02,
                     u_min=-0.05, u_max=0.05, v_min=-0.1, v_max=0.1,
                     T=0.5, nt=nt)
rng = np.random.default_rng(7)
ctl = ControlSet(
    u=rng.uniform(-0.02, 0.02, (nt + 1, n)),
    v=rng.uniform(-0.05, 0.05, (nt + 1, 2)),
    eta=rng.uniform(-0.9, 0.9, (nt + 1, n)),
)
init = InitialData(np.full(n, 1.05), rng.uniform(-0.3, 0.3, n))
state = solve_state(grid, robin, params, init, ctl, newton_tol=1e-12)

tau = trapezoid_weights(nt + 1, params.h)
wq = tau[:, None] * grid.omega[None, :]
ws = tau[:, None] * grid.gamma[None, :]

# adjoint-tangent duality: both sides of the pairing must agree exactly
i1 = rng.standard_normal(state.theta.shape)
i2 = rng.standard_normal(state.theta.shape)
du = rng.standard_normal(ctl.u.shape)
dv = rng.standard_normal(ctl.v.shape)
adj = solve_adjoint(state, AdjointSources(i1, i2, np.zeros_like(i1), np.zeros_like(i1)))
tan = solve_tangent(state, du, dv)
lhs = float(np.sum(wq * (i1 * tan.dtheta + i2 * tan.dphi)))
rhs = float(np.sum(wq * du * adj.p)) + float(
    np.sum(ws * robin.alpha * dv * adj.p[:, grid.boundary_index]))
print(f"duality pairing: lhs={lhs:+.12e} rhs={rhs:+.12e} "
      f"rel err={abs(lhs - rhs) / abs(lhs):.2e}")

# finite-difference audit of the reduced gradient, slot by slot
eps, sigma = 0.1, 0.05
anchors = ctl.copy()
src = build_sources(state, ctl, params, eps, sigma)
adj = solve_adjoint(state, src)
g_u, g_v, g_eta = reduced_gradient(state, adj, src, ctl, params, anchors)


def cost(c):
    traj = solve_state(grid, robin, params, init, c, newton_tol=1e-12)
    return cost_J_eps_sigma(traj, c, params, eps, sigma, anchors).total


t = 1e-5
print(f"\n{'slot':>5} {'directional fd':>18} {'adjoint value':>18} {'rel err':>10}")
for slot in ("u", "v", "eta"):
    pu = rng.uniform(-1, 1, ctl.u.shape) * (slot == "u")
    pv = rng.uniform(-1, 1, ctl.v.shape) * (slot == "v")
    pe = rng.uniform(-1, 1, ctl.eta.shape) * (slot == "eta")
    plus = ControlSet(ctl.u + t * pu, ctl.v + t * pv, ctl.eta + t * pe)
    minus = ControlSet(ctl.u - t * pu, ctl.v - t * pv, ctl.eta - t * pe)
    fd = (cost(plus) - cost(minus)) / (2 * t)
    want = float(np.sum(wq * g_u * pu) + np.sum(ws * g_v * pv)
                 + np.sum(wq * g_eta * pe))
    print(f"{slot:>5} {fd:18.10e} {want:18.10e} "
          f"{abs(fd - want) / max(1.0, abs(want)):10.2e}")
