"""Cost functionals and projected-gradient optimization of the control triple.

Three nested problem forms over the box-constrained triple (u, v, eta):

  J           tracking only: lambda1*|theta - theta_f|^2 + lambda2*|phi - eta|^2
  J_eps       adds the Fenchel-gap penalty (1/eps) * int (j(theta) + eta*theta_c - eta*theta),
              which is nonnegative and vanishes exactly when eta sits in the
              Heaviside graph of theta
  J_eps_sigma smooths j to its Moreau envelope and adds quadratic anchor
              terms |u - u*|^2 + |v - v*|^2 + |eta - eta*|^2 that keep the
              smoothed problem close to an incumbent solution

The optimizer is projected gradient with Armijo backtracking on the
projection arc; the gradient comes from the exact discrete adjoint, so
accepted steps decrease the cost monotonically until the projected
stationarity residual meets the tolerance.  At optimality the gradient
structure forces bang-bang controls: u sits at its lower bound where
p > 0 and at its upper bound where p < 0 (same for v, since alpha > 0),
and eta = -sign(eta_source) wherever that source is nonzero;
`bang_bang_classify` measures how much of the cylinder violates this.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .adjoint import AdjointPair, AdjointSources, build_sources, reduced_gradient, solve_adjoint
from .convex import ConvexContext, fenchel_gap, moreau_j
from .grids import Grid, RobinOperator, trapezoid_weights
from .state import ControlSet, InitialData, ModelParams, StateTrajectory, check_admissible, solve_state

__all__ = [
    "CostReport",
    "ControlProblem",
    "ContinuationSchedule",
    "IterationRecord",
    "OptimizationResult",
    "BangBangReport",
    "cost_J",
    "cost_J_eps",
    "cost_J_eps_sigma",
    "fenchel_gap_integral",
    "project_controls",
    "optimize",
    "continuation",
    "bang_bang_classify",
]

log = logging.getLogger(__name__)


@dataclass
class CostReport:
    """Cost split into its additive parts; total is their exact sum."""

    total: float
    tracking_theta: float
    tracking_phase: float
    fenchel_term: float = 0.0
    penalty_u: float = 0.0
    penalty_v: float = 0.0
    penalty_eta: float = 0.0


@dataclass
class ControlProblem:
    """Which cost is being minimized.

    eps = inf disables the graph penalty (plain tracking).  A finite eps
    without sigma is the limit problem J_eps; giving sigma (and then
    mandatory anchors) selects the smoothed anchored problem J_eps_sigma.
    """

    eps: float
    sigma: float | None = None
    anchors: ControlSet | None = None

    def __post_init__(self):
        if not (self.eps > 0.0):
            raise ValueError("eps must be positive (inf allowed)")
        if self.sigma is not None and not (self.sigma > 0.0):
            raise ValueError("sigma must be positive when given")
        if (self.sigma is None) != (self.anchors is None):
            raise ValueError("sigma and anchors come together: smoothed mode needs both")

    @property
    def penalized(self) -> bool:
        return self.sigma is not None


@dataclass
class ContinuationSchedule:
    """Strictly decreasing positive eps and sigma ladders."""

    eps_list: list
    sigma_list: list = field(default_factory=list)

    def __post_init__(self):
        for name, seq in (("eps_list", self.eps_list), ("sigma_list", self.sigma_list)):
            seq = [float(x) for x in seq]
            if any(x <= 0.0 for x in seq):
                raise ValueError(f"{name} must be positive")
            if any(a <= b for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} must be strictly decreasing")
        if not self.eps_list:
            raise ValueError("eps_list must not be empty")


@dataclass
class IterationRecord:
    iteration: int
    cost: float
    residual: float
    step_size: float = float("nan")
    backtracks: int = 0


@dataclass
class OptimizationResult:
    controls: ControlSet
    state: StateTrajectory
    adjoint: AdjointPair
    sources: AdjointSources
    history: list
    problem: ControlProblem
    params: ModelParams
    converged: bool
    status: str
    zeta: float
    kkt: "BangBangReport | None" = None
    drift: dict | None = None

    @property
    def cost(self) -> float:
        return self.history[-1].cost

    @property
    def residual(self) -> float:
        return self.history[-1].residual


def _weights_q(grid: Grid, nt: int, h: float) -> np.ndarray:
    return trapezoid_weights(nt + 1, h)[:, None] * grid.omega[None, :]


def _weights_sigma(grid: Grid, nt: int, h: float) -> np.ndarray:
    return trapezoid_weights(nt + 1, h)[:, None] * grid.gamma[None, :]


def _tracking_terms(state: StateTrajectory, controls: ControlSet, params: ModelParams):
    wq = _weights_q(state.grid, state.nt, state.h)
    theta_f = params.theta_f_field(state.grid)
    t1 = params.lambda1 * float(np.sum(wq * (state.theta - theta_f) ** 2))
    t2 = params.lambda2 * float(np.sum(wq * (state.phi - controls.eta) ** 2))
    return t1, t2


def fenchel_gap_integral(state: StateTrajectory, controls: ControlSet, params: ModelParams) -> float:
    """Space-time integral of the exact Fenchel gap j(theta) + eta*theta_c - eta*theta."""
    ctx = ConvexContext(params.theta_c)
    wq = _weights_q(state.grid, state.nt, state.h)
    return float(np.sum(wq * fenchel_gap(ctx, state.theta, controls.eta)))


def cost_J(state: StateTrajectory, controls: ControlSet, params: ModelParams) -> CostReport:
    """Plain tracking cost, trapezoid in space and time."""
    t1, t2 = _tracking_terms(state, controls, params)
    return CostReport(total=t1 + t2, tracking_theta=t1, tracking_phase=t2)


def cost_J_eps(state: StateTrajectory, controls: ControlSet, params: ModelParams, eps: float) -> CostReport:
    """Tracking plus the exact graph penalty; the penalty part is always >= 0."""
    if not (eps > 0.0):
        raise ValueError("eps must be positive (inf allowed)")
    t1, t2 = _tracking_terms(state, controls, params)
    if np.any(np.abs(controls.eta) > 1.0):
        raise ValueError("eta leaves [-1, 1]")
    fen = 0.0 if np.isinf(eps) else fenchel_gap_integral(state, controls, params) / eps
    return CostReport(total=t1 + t2 + fen, tracking_theta=t1, tracking_phase=t2, fenchel_term=fen)


def cost_J_eps_sigma(
    state: StateTrajectory,
    controls: ControlSet,
    params: ModelParams,
    eps: float,
    sigma: float,
    anchors: ControlSet,
) -> CostReport:
    """Smoothed, anchored cost.

    The smoothed gap uses the Moreau envelope of j; unlike the exact gap it
    may dip slightly negative (never below -sigma/2 pointwise).
    """
    if not (eps > 0.0):
        raise ValueError("eps must be positive (inf allowed)")
    if not (sigma > 0.0):
        raise ValueError("sigma must be positive")
    t1, t2 = _tracking_terms(state, controls, params)
    if np.any(np.abs(controls.eta) > 1.0):
        raise ValueError("eta leaves [-1, 1]")
    ctx = ConvexContext(params.theta_c)
    grid, nt, h = state.grid, state.nt, state.h
    wq = _weights_q(grid, nt, h)
    if np.isinf(eps):
        fen = 0.0
    else:
        gap = (
            moreau_j(ctx, state.theta, sigma)
            + controls.eta * params.theta_c
            - controls.eta * state.theta
        )
        fen = float(np.sum(wq * gap)) / eps
    pen_u = float(np.sum(wq * (controls.u - anchors.u) ** 2))
    pen_v = float(np.sum(_weights_sigma(grid, nt, h) * (controls.v - anchors.v) ** 2))
    pen_eta = float(np.sum(wq * (controls.eta - anchors.eta) ** 2))
    return CostReport(
        total=t1 + t2 + fen + pen_u + pen_v + pen_eta,
        tracking_theta=t1,
        tracking_phase=t2,
        fenchel_term=fen,
        penalty_u=pen_u,
        penalty_v=pen_v,
        penalty_eta=pen_eta,
    )


def project_controls(controls: ControlSet, params: ModelParams) -> ControlSet:
    """Pointwise clamp onto the admissible boxes; idempotent."""
    return ControlSet(
        u=np.clip(controls.u, params.u_min, params.u_max),
        v=np.clip(controls.v, params.v_min, params.v_max),
        eta=np.clip(controls.eta, -1.0, 1.0),
    )


def _evaluate_cost(state, controls, params, problem: ControlProblem) -> CostReport:
    if problem.penalized:
        return cost_J_eps_sigma(state, controls, params, problem.eps, problem.sigma, problem.anchors)
    return cost_J_eps(state, controls, params, problem.eps)


def _exact_eta(state: StateTrajectory, params: ModelParams, problem: ControlProblem, eta_now):
    """Pointwise eta minimizer at a fixed state.

    eta never enters the PDE, so its subproblem is separable: quadratic
    (strictly convex for lambda2 > 0 or in anchored mode) or linear when
    lambda2 = 0 without anchors, where the minimizer is a sign selection.
    A unit gradient step has the wrong curvature for the quadratic case
    (it mirrors eta across the minimizer without changing its cost), so
    the optimizer always updates this slot exactly.
    """
    lam = params.lambda2
    inv_eps = 0.0 if np.isinf(problem.eps) else 1.0 / problem.eps
    drive = inv_eps * (state.theta - params.theta_c)
    if problem.penalized:
        anchor = problem.anchors.eta
        if lam == 0.0:
            return np.clip(anchor + 0.5 * drive, -1.0, 1.0)
        return np.clip((lam * state.phi + anchor + 0.5 * drive) / (lam + 1.0), -1.0, 1.0)
    if lam == 0.0:
        if inv_eps == 0.0:
            return np.asarray(eta_now, dtype=float)  # cost blind to eta
        out = np.sign(drive)
        return np.where(drive == 0.0, np.asarray(eta_now, dtype=float), out)
    return np.clip(state.phi + 0.5 * drive / lam, -1.0, 1.0)


def optimize(
    grid: Grid,
    robin: RobinOperator,
    params: ModelParams,
    init: InitialData,
    problem: ControlProblem,
    init_controls: ControlSet,
    *,
    budget: int = 200,
    tol: float = 1e-6,
    armijo_c: float = 1e-4,
    backtrack_factor: float = 0.5,
    initial_step: float = 1.0,
    max_backtracks: int = 40,
    newton_tol: float = 1e-10,
    newton_max_iter: int = 50,
    selection_at_theta_c: float = 0.0,
) -> OptimizationResult:
    """Projected gradient with Armijo backtracking on the projection arc.

    Stops when ||c - P(c - g)|| / max(1, ||c||) <= tol (norms are the
    weighted space-time norms of the three slots combined) or when `budget`
    accepted steps are exhausted.  Every accepted iterate strictly decreases
    the cost.  The eta slot is always updated by its exact pointwise
    minimizer instead of a gradient step; only u and v take gradient steps
    through the PDE.
    """
    check_admissible(init_controls, params)
    wq = _weights_q(grid, params.nt, params.h)
    ws = _weights_sigma(grid, params.nt, params.h)

    def inner(au, av, ae, bu, bv, be):
        return float(np.sum(wq * au * bu) + np.sum(ws * av * bv) + np.sum(wq * ae * be))

    def norm(cu, cv, ce):
        return np.sqrt(inner(cu, cv, ce, cu, cv, ce))

    def forward(c):
        return solve_state(
            grid, robin, params, init, c, newton_tol=newton_tol, newton_max_iter=newton_max_iter
        )

    controls = init_controls.copy()
    state = forward(controls)
    controls.eta = _exact_eta(state, params, problem, controls.eta)
    cost = _evaluate_cost(state, controls, params, problem).total

    history = []
    status = "budget_exhausted"
    converged = False
    it = 0
    while True:
        sources = build_sources(
            state, controls, params, problem.eps, problem.sigma,
            selection_at_theta_c=selection_at_theta_c,
        )
        adj = solve_adjoint(state, sources)
        g_u, g_v, g_eta = reduced_gradient(state, adj, sources, controls, params, problem.anchors)
        proj = project_controls(
            ControlSet(controls.u - g_u, controls.v - g_v, controls.eta - g_eta), params
        )
        residual = norm(
            controls.u - proj.u, controls.v - proj.v, controls.eta - proj.eta
        ) / max(1.0, norm(controls.u, controls.v, controls.eta))
        history.append(IterationRecord(it, cost, residual))
        if residual <= tol:
            status, converged = "converged", True
            break
        if it >= budget:
            break

        step = initial_step
        accepted = False
        backtracks = 0
        for bt in range(max_backtracks + 1):
            trial = project_controls(
                ControlSet(controls.u - step * g_u, controls.v - step * g_v, controls.eta),
                params,
            )
            trial_state = forward(trial)
            trial.eta = _exact_eta(trial_state, params, problem, trial.eta)
            trial_cost = _evaluate_cost(trial_state, trial, params, problem).total
            slope = inner(
                g_u, g_v, g_eta,
                trial.u - controls.u, trial.v - controls.v, trial.eta - controls.eta,
            )
            if trial_cost <= cost + armijo_c * slope and trial_cost < cost:
                accepted = True
                backtracks = bt
                break
            step *= backtrack_factor
        if not accepted:
            status = "line_search_failed"
            break
        controls, state, cost = trial, trial_state, trial_cost
        it += 1
        history[-1].step_size = step
        history[-1].backtracks = backtracks
        log.debug("iter %d cost %.6e residual %.3e step %.3e", it, cost, residual, step)

    sources = build_sources(
        state, controls, params, problem.eps, problem.sigma,
        selection_at_theta_c=selection_at_theta_c,
    )
    adj = solve_adjoint(state, sources)
    result = OptimizationResult(
        controls=controls,
        state=state,
        adjoint=adj,
        sources=sources,
        history=history,
        problem=problem,
        params=params,
        converged=converged,
        status=status,
        zeta=fenchel_gap_integral(state, controls, params),
    )
    result.kkt = bang_bang_classify(result)
    return result


def continuation(
    grid: Grid,
    robin: RobinOperator,
    params: ModelParams,
    init: InitialData,
    schedule: ContinuationSchedule,
    init_controls: ControlSet,
    *,
    budget: int = 200,
    tol: float = 1e-6,
    **optimize_kwargs,
) -> list:
    """Ladder of solves with warm starts.

    For each eps the limit problem is solved first; its optimum anchors the
    subsequent sigma stages at that eps (the smoothing ladder), while every
    stage warm-starts from the incumbent controls.  Each result records the
    exact Fenchel gap of its optimum (`zeta`) and the drift of each control
    slot against the previous stage.
    """
    incumbent = init_controls
    results = []
    prev = None
    wq = _weights_q(grid, params.nt, params.h)
    ws = _weights_sigma(grid, params.nt, params.h)

    def drift(a: ControlSet, b: ControlSet):
        return {
            "u": float(np.sqrt(np.sum(wq * (a.u - b.u) ** 2))),
            "v": float(np.sqrt(np.sum(ws * (a.v - b.v) ** 2))),
            "eta": float(np.sqrt(np.sum(wq * (a.eta - b.eta) ** 2))),
        }

    for eps in schedule.eps_list:
        res = optimize(
            grid, robin, params, init, ControlProblem(eps=eps), incumbent,
            budget=budget, tol=tol, **optimize_kwargs,
        )
        res.drift = None if prev is None else drift(res.controls, prev)
        results.append(res)
        incumbent = prev = res.controls
        anchor = res.controls.copy()
        for sigma in schedule.sigma_list:
            res = optimize(
                grid, robin, params, init,
                ControlProblem(eps=eps, sigma=sigma, anchors=anchor), incumbent,
                budget=budget, tol=tol, **optimize_kwargs,
            )
            res.drift = drift(res.controls, prev)
            results.append(res)
            incumbent = prev = res.controls
    return results


@dataclass
class BangBangReport:
    """Where the optimality structure pins each control, and how much strays.

    Bands per point: -1 lower bound expected, +1 upper bound expected, 0 free
    (dual certificate inside its tolerance band).  Violation measures are
    weighted space-time measures of points whose control disobeys its band;
    fractions are relative to the measure of the whole cylinder (or of the
    lateral boundary for v).
    """

    u_bands: np.ndarray
    v_bands: np.ndarray
    eta_bands: np.ndarray
    u_violation: float
    v_violation: float
    eta_violation: float
    u_fraction: float
    v_fraction: float
    eta_fraction: float
    tol_p: float
    tol_source: float


def bang_bang_classify(
    result: OptimizationResult,
    tol_p: float | None = None,
    tol_source: float | None = None,
    eq_rtol: float = 1e-6,
) -> BangBangReport:
    """Check the sign structure of the optimality conditions.

    u must sit at u_min where p > tol_p and at u_max where p < -tol_p; v
    likewise against p on the boundary (alpha > 0 keeps the sign); eta must
    be -1 where eta_source > tol_source and +1 where it is < -tol_source.
    Defaults resolve the tolerances to 1e-6 times the max magnitude of the
    certificate, and a control counts as "at the bound" within eq_rtol times
    its box width.  The eta tolerance is floored at the rounding noise of
    the source assembly: an exact pointwise eta minimizer cancels the
    source to machine precision, and that residue must classify as free.
    """
    params = result.params
    state = result.state
    grid = state.grid
    p = result.adjoint.p
    source = result.sources.eta_source
    if tol_p is None:
        tol_p = 1e-6 * float(np.max(np.abs(p)))
    if tol_source is None:
        eps = result.problem.eps
        inv_eps = 0.0 if np.isinf(eps) else 1.0 / eps
        noise = np.finfo(float).eps * (
            2.0 * params.lambda2 * (float(np.max(np.abs(state.phi))) + 1.0)
            + inv_eps * (params.theta_c + float(np.max(np.abs(state.theta))))
        )
        tol_source = max(1e-6 * float(np.max(np.abs(source))), 4.0 * noise)

    wq = _weights_q(grid, state.nt, state.h)
    ws = _weights_sigma(grid, state.nt, state.h)
    q_measure = float(np.sum(wq))
    s_measure = float(np.sum(ws))

    def bands_of(cert, tol):
        b = np.zeros(cert.shape, dtype=np.int8)
        b[cert > tol] = -1  # positive certificate pushes to the lower bound
        b[cert < -tol] = +1
        return b

    u_bands = bands_of(p, tol_p)
    pb = p[:, grid.boundary_index]
    v_bands = bands_of(pb, tol_p)
    eta_bands = bands_of(source, tol_source)

    def violation(bands, values, lo, hi, weights):
        slack = eq_rtol * max(hi - lo, 0.0)
        bad = ((bands == -1) & (values > lo + slack)) | ((bands == +1) & (values < hi - slack))
        return float(np.sum(weights[bad]))

    u_viol = violation(u_bands, result.controls.u, params.u_min, params.u_max, wq)
    v_viol = violation(v_bands, result.controls.v, params.v_min, params.v_max, ws)
    eta_viol = violation(eta_bands, result.controls.eta, -1.0, 1.0, wq)
    return BangBangReport(
        u_bands=u_bands,
        v_bands=v_bands,
        eta_bands=eta_bands,
        u_violation=u_viol,
        v_violation=v_viol,
        eta_violation=eta_viol,
        u_fraction=u_viol / q_measure,
        v_fraction=v_viol / s_measure,
        eta_fraction=eta_viol / q_measure,
        tol_p=tol_p,
        tol_source=tol_source,
    )
