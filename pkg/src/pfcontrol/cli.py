"""Command-line front door.

Subcommands: forward (one simulation), gradcheck (finite-difference audit
of the adjoint gradient), optimize (single projected-gradient solve),
continue (warm-started eps/sigma ladder), sweep (independent grid of
eps/sigma cells).  Exit codes: 0 ok, 2 bad configuration, 3 solver
failure, 4 i/o failure.

Every run writes a manifest.json echoing the fully defaulted config, the
command and the seed; pointing --config at a manifest replays the run.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import runio
from .adjoint import build_sources, reduced_gradient, solve_adjoint
from .config import ConfigError, RunConfig, load_config
from .optimize import (
    ControlProblem,
    cost_J_eps,
    cost_J_eps_sigma,
    continuation,
    optimize,
    project_controls,
)
from .grids import trapezoid_weights
from .state import ControlSet, NewtonError, StepFailure, solve_state

log = logging.getLogger(__name__)


def _setup(cfg: RunConfig):
    grid = cfg.build_grid()
    robin = cfg.build_robin(grid)
    params = cfg.build_params(grid)
    init = cfg.build_initial(grid)
    controls = project_controls(cfg.build_controls(grid), params)
    return grid, robin, params, init, controls


def _problem(cfg: RunConfig, anchors) -> ControlProblem:
    pr = cfg.data["problem"]
    eps = math.inf if pr["eps"] is None else float(pr["eps"])
    sigma = pr["sigma"]
    if sigma is None:
        return ControlProblem(eps=eps)
    return ControlProblem(eps=eps, sigma=float(sigma), anchors=anchors.copy())


def _tol_kwargs(cfg: RunConfig) -> dict:
    tol = cfg.data["tolerances"]
    return {
        "newton_tol": float(tol["newton_tol"]),
        "newton_max_iter": int(tol["newton_max_iter"]),
    }


def _stage_row(res):
    drift = res.drift or {"u": "", "v": "", "eta": ""}
    return (
        res.problem.eps,
        "" if res.problem.sigma is None else runio.fmt(res.problem.sigma),
        res.cost,
        res.residual,
        res.zeta,
        res.kkt.u_fraction,
        res.kkt.v_fraction,
        res.kkt.eta_fraction,
        drift["u"],
        drift["v"],
        drift["eta"],
    )


def _write_solution(out, grid, times, res, suffix=""):
    runio.write_state_csv(out / f"state{suffix}.csv", grid, times, res.state.theta, res.state.phi)
    runio.write_adjoint_csv(out / f"adjoint{suffix}.csv", grid, times, res.adjoint.p, res.adjoint.q)
    runio.write_controls_csv(out, grid, times, res.controls, suffix=suffix)
    runio.write_diagnostics_csv(out / f"diagnostics{suffix}.csv", res.state)


def cmd_forward(cfg: RunConfig, out: Path, seed: int) -> dict:
    grid, robin, params, init, controls = _setup(cfg)
    traj = solve_state(grid, robin, params, init, controls, **_tol_kwargs(cfg))
    times = traj.times()
    runio.write_state_csv(out / "state_forward.csv", grid, times, traj.theta, traj.phi)
    runio.write_controls_csv(out, grid, times, controls)
    runio.write_diagnostics_csv(out / "diagnostics.csv", traj)
    for name, field in (("theta", traj.theta), ("phi", traj.phi)):
        runio.write_snapshot(out / f"snap_{name}_initial.bin", field[0], grid.counts)
        runio.write_snapshot(out / f"snap_{name}_final.bin", field[-1], grid.counts)
    log.info(
        "forward: %d steps, min theta %.6g, worst balance defect %.3e",
        traj.nt, traj.min_theta.min(), traj.balance_residual.max(),
    )
    return {
        "min_theta": float(traj.min_theta.min()),
        "max_theta": float(traj.max_theta.max()),
        "max_balance_residual": float(traj.balance_residual.max()),
    }


def cmd_gradcheck(cfg: RunConfig, out: Path, seed: int) -> dict:
    grid, robin, params, init, controls = _setup(cfg)
    tolcfg = cfg.data["tolerances"]
    fd_step = float(tolcfg["fd_step"])
    n_dir = int(tolcfg["n_directions"])
    problem = _problem(cfg, controls)

    # Pull the base point strictly inside the boxes so central differences
    # stay admissible.
    margin_u = min(10 * fd_step, 0.25 * (params.u_max - params.u_min)) if params.u_max > params.u_min else 0.0
    margin_v = min(10 * fd_step, 0.25 * (params.v_max - params.v_min)) if params.v_max > params.v_min else 0.0
    margin_e = min(10 * fd_step, 0.25)
    base = ControlSet(
        u=np.clip(controls.u, params.u_min + margin_u, params.u_max - margin_u),
        v=np.clip(controls.v, params.v_min + margin_v, params.v_max - margin_v),
        eta=np.clip(controls.eta, -1.0 + margin_e, 1.0 - margin_e),
    )

    def cost_at(c):
        traj = solve_state(grid, robin, params, init, c, **_tol_kwargs(cfg))
        if problem.penalized:
            return cost_J_eps_sigma(traj, c, params, problem.eps, problem.sigma, problem.anchors).total
        return cost_J_eps(traj, c, params, problem.eps).total

    state = solve_state(grid, robin, params, init, base, **_tol_kwargs(cfg))
    sources = build_sources(state, base, params, problem.eps, problem.sigma)
    adj = solve_adjoint(state, sources)
    g_u, g_v, g_eta = reduced_gradient(state, adj, sources, base, params, problem.anchors)

    tau = trapezoid_weights(params.nt + 1, params.h)
    wq = tau[:, None] * grid.omega[None, :]
    ws = tau[:, None] * grid.gamma[None, :]

    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for idx in range(n_dir):
        du = rng.uniform(-1.0, 1.0, base.u.shape)
        dv = rng.uniform(-1.0, 1.0, base.v.shape)
        de = rng.uniform(-1.0, 1.0, base.eta.shape)
        for slot, (pu, pv, pe) in (
            ("u", (du, 0.0, 0.0)),
            ("v", (0.0, dv, 0.0)),
            ("eta", (0.0, 0.0, de)),
            ("joint", (du, dv, de)),
        ):
            plus = ControlSet(base.u + fd_step * pu, base.v + fd_step * pv, base.eta + fd_step * pe)
            minus = ControlSet(base.u - fd_step * pu, base.v - fd_step * pv, base.eta - fd_step * pe)
            fd = (cost_at(plus) - cost_at(minus)) / (2.0 * fd_step)
            analytic = float(np.sum(wq * g_u * pu) + np.sum(ws * g_v * pv) + np.sum(wq * g_eta * pe))
            rel = abs(fd - analytic) / max(1.0, abs(analytic))
            worst = max(worst, rel)
            rows.append((idx, slot, analytic, fd, rel))
    runio.write_csv(out / "gradcheck.csv", ["direction", "slot", "analytic", "fd", "rel_err"], rows)
    log.info("gradcheck: %d directions, max rel err %.3e", n_dir, worst)
    return {"max_rel_err": worst, "fd_step": fd_step, "directions": n_dir}


def cmd_optimize(cfg: RunConfig, out: Path, seed: int) -> dict:
    grid, robin, params, init, controls = _setup(cfg)
    tolcfg = cfg.data["tolerances"]
    res = optimize(
        grid, robin, params, init, _problem(cfg, controls), controls,
        budget=int(tolcfg["budget"]), tol=float(tolcfg["stat_tol"]), **_tol_kwargs(cfg),
    )
    times = res.state.times()
    _write_solution(out, grid, times, res)
    runio.write_history_csv(
        out / "history.csv", [res.history], [(0, res.problem.eps, res.problem.sigma)]
    )
    runio.write_stages_csv(out / "stages.csv", [_stage_row(res)])
    log.info("optimize: %s after %d iterations, cost %.6e, residual %.3e",
             res.status, res.history[-1].iteration, res.cost, res.residual)
    return {
        "status": res.status,
        "iterations": res.history[-1].iteration,
        "cost": res.cost,
        "residual": res.residual,
        "zeta": res.zeta,
    }


def cmd_continue(cfg: RunConfig, out: Path, seed: int) -> dict:
    grid, robin, params, init, controls = _setup(cfg)
    tolcfg = cfg.data["tolerances"]
    results = continuation(
        grid, robin, params, init, cfg.build_schedule(), controls,
        budget=int(tolcfg["budget"]), tol=float(tolcfg["stat_tol"]), **_tol_kwargs(cfg),
    )
    times = results[-1].state.times()
    _write_solution(out, grid, times, results[-1])
    labels = [(i, r.problem.eps, r.problem.sigma) for i, r in enumerate(results)]
    runio.write_history_csv(out / "history.csv", [r.history for r in results], labels)
    runio.write_stages_csv(out / "stages.csv", [_stage_row(r) for r in results])
    log.info("continue: %d stages, final cost %.6e, final zeta %.3e",
             len(results), results[-1].cost, results[-1].zeta)
    return {
        "stages": len(results),
        "final_cost": results[-1].cost,
        "final_zeta": results[-1].zeta,
        "statuses": [r.status for r in results],
    }


def cmd_sweep(cfg: RunConfig, out: Path, seed: int) -> dict:
    grid, robin, params, init, controls = _setup(cfg)
    tolcfg = cfg.data["tolerances"]
    schedule = cfg.build_schedule()
    sigmas = schedule.sigma_list or [None]
    rows = []
    cells = []
    for i, eps in enumerate(schedule.eps_list):
        for k, sigma in enumerate(sigmas):
            if sigma is None:
                problem = ControlProblem(eps=eps)
            else:
                problem = ControlProblem(eps=eps, sigma=sigma, anchors=controls.copy())
            res = optimize(
                grid, robin, params, init, problem, controls,
                budget=int(tolcfg["budget"]), tol=float(tolcfg["stat_tol"]), **_tol_kwargs(cfg),
            )
            cell = out / f"cell_{i:02d}_{k:02d}"
            cell.mkdir(parents=True, exist_ok=True)
            times = res.state.times()
            _write_solution(cell, grid, times, res)
            runio.write_history_csv(cell / "history.csv", [res.history], [(0, eps, sigma)])
            rows.append(_stage_row(res))
            cells.append({"eps": eps, "sigma": sigma, "cost": res.cost, "status": res.status})
            log.info("sweep cell eps=%g sigma=%s: %s, cost %.6e", eps, sigma, res.status, res.cost)
    runio.write_stages_csv(out / "stages.csv", rows)
    return {"cells": cells}


_COMMANDS = {
    "forward": cmd_forward,
    "gradcheck": cmd_gradcheck,
    "optimize": cmd_optimize,
    "continue": cmd_continue,
    "sweep": cmd_sweep,
}


def run_command(command: str, cfg: RunConfig, out_dir, seed=None, verbose=False) -> dict:
    """Execute one subcommand; used by main() and by manifest replay."""
    if verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    effective_seed = int(cfg.data["seed"] if seed is None else seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    summary = _COMMANDS[command](cfg, out, effective_seed)
    runio.write_manifest(
        out / "manifest.json", command, cfg.echo(), effective_seed, summary,
        time.perf_counter() - start,
    )
    return summary


def replay_manifest(manifest_path, out_dir, verbose=False) -> dict:
    """Re-run the command recorded in a manifest into a fresh directory."""
    manifest = runio.read_manifest(manifest_path)
    cfg = load_config(manifest_path)
    return run_command(manifest["command"], cfg, out_dir, seed=manifest["seed"], verbose=verbose)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pfcontrol",
        description="Sharp-interface optimal control of a phase-field solidification model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("forward", "run one forward simulation"),
        ("gradcheck", "finite-difference audit of the adjoint gradient"),
        ("optimize", "projected-gradient solve of the configured problem"),
        ("continue", "warm-started continuation over the eps/sigma schedule"),
        ("sweep", "independent solves over the eps/sigma grid"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to a JSON config or a manifest")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        out_dir = args.out if args.out is not None else cfg.data["output_dir"]
        run_command(args.command, cfg, out_dir, seed=args.seed, verbose=args.verbose)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4
    except (StepFailure, NewtonError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
