"""JSON run configuration: defaults, validation, and builders.

A run config is a flat JSON object; every section has defaults, so `{}`
is valid.  Field-valued entries (initial data, targets, controls, alpha)
accept a plain number, an expression in the node coordinates, a literal
table of nodal values, or a binary snapshot file:

    1.25
    {"type": "expr", "formula": "theta_c + 0.1*sign(x - 0.5)"}
    {"type": "table", "values": [...]}
    {"type": "file", "path": "snap.bin"}

Expressions see x (and y in 2d), t for time-indexed fields, theta_c, and
a small set of numpy functions.  Validation errors name the offending
key and the violated constraint and are raised as ConfigError.
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .grids import Grid, RobinOperator
from .optimize import ContinuationSchedule
from .state import ControlSet, InitialData, ModelParams

__all__ = ["ConfigError", "RunConfig", "load_config", "DEFAULTS"]


class ConfigError(ValueError):
    """Invalid run configuration."""


DEFAULTS = {
    "grid": {"extents": [1.0], "counts": [32]},
    "time": {"T": 1.0, "nt": 24},
    "model": {"theta_c": 1.0, "lambda1": 1.0, "lambda2": 1.0, "theta_f": 1.0},
    "alpha": 1.0,
    "bounds": {"u_min": -0.05, "u_max": 0.05, "v_min": -0.1, "v_max": 0.1},
    "initial": {"theta0": 1.0, "phi0": 0.0},
    "controls": {"u": 0.0, "v": 0.0, "eta": 0.0},
    "problem": {"eps": 0.1, "sigma": None},
    "schedule": {"eps_list": [0.1], "sigma_list": []},
    "tolerances": {
        "newton_tol": 1e-10,
        "newton_max_iter": 50,
        "stat_tol": 1e-6,
        "budget": 200,
        "fd_step": 1e-5,
        "n_directions": 10,
    },
    "seed": 0,
    "output_dir": "out",
}

_EXPR_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "sign": np.sign, "tanh": np.tanh,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
    "clip": np.clip, "pi": np.pi, "e": np.e,
}


def _merge_defaults(data: dict) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in data.items():
        if key not in cfg:
            raise ConfigError(f"unknown config key '{key}'")
        if isinstance(cfg[key], dict) and isinstance(value, dict):
            for sub, subval in value.items():
                if sub not in cfg[key]:
                    raise ConfigError(f"unknown config key '{key}.{sub}'")
                cfg[key][sub] = subval
        else:
            cfg[key] = value
    return cfg


def _eval_field(spec, names: dict, n_nodes: int, key: str) -> np.ndarray:
    """Evaluate one field spec to an (n_nodes,) array."""
    if isinstance(spec, (int, float)):
        return np.full(n_nodes, float(spec))
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"{key}: expected a number or a typed spec, got {spec!r}")
    kind = spec["type"]
    if kind == "constant":
        return np.full(n_nodes, float(spec["value"]))
    if kind == "expr":
        try:
            out = eval(spec["formula"], {"__builtins__": {}}, dict(names))  # noqa: S307
        except Exception as err:
            raise ConfigError(f"{key}: expression failed: {err}") from err
        return np.broadcast_to(np.asarray(out, dtype=float), (n_nodes,)).copy()
    if kind == "table":
        values = np.asarray(spec["values"], dtype=float)
        if values.shape != (n_nodes,):
            raise ConfigError(f"{key}: table has {values.shape} values, expected ({n_nodes},)")
        return values
    if kind == "file":
        from .runio import read_snapshot

        _, _, values = read_snapshot(spec["path"])
        if values.shape != (n_nodes,):
            raise ConfigError(f"{key}: snapshot has {values.shape} values, expected ({n_nodes},)")
        return values
    raise ConfigError(f"{key}: unknown field spec type '{kind}'")


@dataclass
class RunConfig:
    """Validated run configuration with builders for the solver objects."""

    data: dict

    def __post_init__(self):
        self.validate()

    def validate(self):
        cfg = self.data
        g = cfg["grid"]
        if len(g["extents"]) != len(g["counts"]) or len(g["counts"]) not in (1, 2):
            raise ConfigError("grid: extents and counts must both have length 1 or 2")
        if any(e <= 0 for e in g["extents"]):
            raise ConfigError("grid.extents must be positive")
        if any(c < 3 for c in g["counts"]):
            raise ConfigError("grid.counts needs at least 3 nodes per axis")
        t = cfg["time"]
        if t["T"] <= 0:
            raise ConfigError("time.T must be positive")
        if int(t["nt"]) < 1:
            raise ConfigError("time.nt must be at least 1")
        m = cfg["model"]
        if m["theta_c"] <= 0:
            raise ConfigError("model.theta_c must be positive (temperatures are absolute)")
        if m["lambda1"] < 0 or m["lambda2"] < 0:
            raise ConfigError("model.lambda1 and model.lambda2 must be nonnegative")
        b = cfg["bounds"]
        if b["u_min"] > b["u_max"]:
            raise ConfigError("bounds: control box needs u_min <= u_max")
        if b["v_min"] > b["v_max"]:
            raise ConfigError("bounds: control box needs v_min <= v_max")
        alpha = cfg["alpha"]
        if isinstance(alpha, (int, float)) and alpha <= 0:
            raise ConfigError(
                "alpha: the boundary heat-exchange coefficient must satisfy "
                "0 < alpha_min <= alpha(x) <= alpha_max"
            )
        pr = cfg["problem"]
        if not (pr["eps"] is None or pr["eps"] > 0):
            raise ConfigError("problem.eps must be positive")
        if pr["sigma"] is not None and pr["sigma"] <= 0:
            raise ConfigError("problem.sigma must be positive when given")
        try:
            ContinuationSchedule(cfg["schedule"]["eps_list"], cfg["schedule"]["sigma_list"])
        except ValueError as err:
            raise ConfigError(f"schedule: {err}") from err
        tol = cfg["tolerances"]
        if tol["newton_tol"] <= 0 or tol["stat_tol"] <= 0:
            raise ConfigError("tolerances must be positive")
        if int(tol["newton_max_iter"]) < 1 or int(tol["budget"]) < 0:
            raise ConfigError("tolerances: newton_max_iter >= 1 and budget >= 0 required")
        if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
            raise ConfigError("seed must be a nonnegative integer")

    # -- builders -----------------------------------------------------------

    def build_grid(self) -> Grid:
        g = self.data["grid"]
        return Grid(g["extents"], g["counts"])

    def _names(self, grid: Grid, t=None) -> dict:
        names = dict(_EXPR_FUNCS)
        names["x"] = grid.coords[:, 0]
        if grid.dim == 2:
            names["y"] = grid.coords[:, 1]
        names["theta_c"] = self.data["model"]["theta_c"]
        if t is not None:
            names["t"] = t
        return names

    def _boundary_names(self, grid: Grid, t=None) -> dict:
        names = self._names(grid, t)
        names["x"] = grid.coords[grid.boundary_index, 0]
        if grid.dim == 2:
            names["y"] = grid.coords[grid.boundary_index, 1]
        return names

    def build_robin(self, grid: Grid) -> RobinOperator:
        spec = self.data["alpha"]
        alpha = _eval_field(spec, self._boundary_names(grid), grid.n_boundary, "alpha")
        if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
            raise ConfigError(
                "alpha: the boundary heat-exchange coefficient must satisfy "
                "0 < alpha_min <= alpha(x) <= alpha_max"
            )
        return RobinOperator(grid, alpha)

    def build_params(self, grid: Grid) -> ModelParams:
        m, b, t = self.data["model"], self.data["bounds"], self.data["time"]
        nt = int(t["nt"])
        h = t["T"] / nt
        theta_f = np.stack(
            [
                _eval_field(m["theta_f"], self._names(grid, t=k * h), grid.n_nodes, "model.theta_f")
                for k in range(nt + 1)
            ]
        )
        params = ModelParams(
            theta_c=float(m["theta_c"]),
            lambda1=float(m["lambda1"]),
            lambda2=float(m["lambda2"]),
            theta_f=theta_f,
            u_min=float(b["u_min"]),
            u_max=float(b["u_max"]),
            v_min=float(b["v_min"]),
            v_max=float(b["v_max"]),
            T=float(t["T"]),
            nt=nt,
        )
        # Guidance, not a constraint: the sharp-interface tracking problem is
        # meaningful when the target stays near the transition temperature.
        span = float(np.max(np.abs(theta_f - params.theta_c)))
        if span > 0.5 * params.theta_c:
            warnings.warn(
                f"theta_f strays {span:.3g} from theta_c; the indicator tracking "
                "is designed for targets near the transition temperature",
                stacklevel=2,
            )
        return params

    def build_initial(self, grid: Grid) -> InitialData:
        spec = self.data["initial"]
        names = self._names(grid)
        theta0 = _eval_field(spec["theta0"], names, grid.n_nodes, "initial.theta0")
        phi0 = _eval_field(spec["phi0"], names, grid.n_nodes, "initial.phi0")
        if np.any(theta0 <= 0):
            raise ConfigError("initial.theta0 must be strictly positive (absolute temperature)")
        return InitialData(theta0=theta0, phi0=phi0)

    def build_controls(self, grid: Grid) -> ControlSet:
        spec = self.data["controls"]
        nt = int(self.data["time"]["nt"])
        h = self.data["time"]["T"] / nt
        u = np.stack(
            [_eval_field(spec["u"], self._names(grid, k * h), grid.n_nodes, "controls.u")
             for k in range(nt + 1)]
        )
        v = np.stack(
            [_eval_field(spec["v"], self._boundary_names(grid, k * h), grid.n_boundary, "controls.v")
             for k in range(nt + 1)]
        )
        eta = np.stack(
            [_eval_field(spec["eta"], self._names(grid, k * h), grid.n_nodes, "controls.eta")
             for k in range(nt + 1)]
        )
        return ControlSet(u=u, v=v, eta=eta)

    def build_schedule(self) -> ContinuationSchedule:
        s = self.data["schedule"]
        return ContinuationSchedule(list(s["eps_list"]), list(s["sigma_list"]))

    def echo(self) -> dict:
        return copy.deepcopy(self.data)


def load_config(path) -> RunConfig:
    """Read a config file; a manifest written by a previous run also works."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if "config" in data and "command" in data:
        data = data["config"]
    return RunConfig(_merge_defaults(data))
