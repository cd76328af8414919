"""End-to-end command tests: files written, determinism, replay, exit codes."""

import csv
import json

import numpy as np

from pfcontrol.cli import main, replay_manifest
from pfcontrol.runio import read_manifest, read_snapshot

SMALL = {
    "grid": {"extents": [1.0], "counts": [7]},
    "time": {"T": 0.25, "nt": 4},
    "model": {"theta_c": 1.0, "lambda1": 1.0, "lambda2": 1.0, "theta_f": 1.02},
    "initial": {"theta0": 1.05, "phi0": 0.0},
    "tolerances": {"budget": 5, "n_directions": 2},
}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def run(tmp_path, command, data=None, out="out", extra=()):
    cfg = write_config(tmp_path, SMALL if data is None else data)
    code = main([command, "--config", str(cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def tree_bytes(root):
    """Map of relative path -> bytes for every data file under root."""
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.suffix in (".csv", ".bin")
    }


class TestForward:
    def test_writes_expected_files(self, tmp_path):
        code, out = run(tmp_path, "forward")
        assert code == 0
        for name in ("state_forward.csv", "controls_u.csv", "controls_v.csv",
                     "controls_eta.csv", "diagnostics.csv", "manifest.json",
                     "snap_theta_initial.bin", "snap_theta_final.bin",
                     "snap_phi_initial.bin", "snap_phi_final.bin"):
            assert (out / name).exists(), name
        manifest = read_manifest(out / "manifest.json")
        assert manifest["command"] == "forward"
        assert manifest["summary"]["min_theta"] > 0

    def test_stationary_state_is_constant(self, tmp_path):
        data = {
            "grid": {"extents": [1.0], "counts": [6]},
            "time": {"T": 1.0, "nt": 8},
            "model": {"theta_c": 1.3, "theta_f": 1.3},
            "initial": {"theta0": 1.3, "phi0": 1.0},
            "bounds": {"u_min": 0.0, "u_max": 0.0,
                       "v_min": 0.0, "v_max": 0.0},
            # wall target at beta(theta_c) keeps the boundary in equilibrium
            "controls": {"u": 0.0, "v": 1.3 - 1.0 / 1.3, "eta": 0.0},
        }
        # v must live in its box for the run to start
        data["bounds"]["v_min"] = data["bounds"]["v_max"] = 1.3 - 1.0 / 1.3
        code, out = run(tmp_path, "forward", data)
        assert code == 0
        with (out / "state_forward.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        theta = np.array([float(r["theta"]) for r in rows])
        phi = np.array([float(r["phi"]) for r in rows])
        assert np.max(np.abs(theta - 1.3)) < 1e-10
        assert np.max(np.abs(phi - 1.0)) < 1e-10

    def test_snapshot_contents_match_initial_field(self, tmp_path):
        code, out = run(tmp_path, "forward")
        assert code == 0
        dim, counts, values = read_snapshot(out / "snap_theta_initial.bin")
        assert dim == 1 and counts == (7,)
        assert np.all(values == 1.05)


class TestDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path):
        code1, out1 = run(tmp_path, "forward", out="run1")
        code2, out2 = run(tmp_path, "forward", out="run2")
        assert code1 == code2 == 0
        t1, t2 = tree_bytes(out1), tree_bytes(out2)
        assert t1.keys() == t2.keys()
        assert t1 == t2

    def test_optimize_reruns_are_byte_identical(self, tmp_path):
        code1, out1 = run(tmp_path, "optimize", out="run1")
        code2, out2 = run(tmp_path, "optimize", out="run2")
        assert code1 == code2 == 0
        assert tree_bytes(out1) == tree_bytes(out2)

    def test_manifest_replay_reproduces(self, tmp_path):
        code, out = run(tmp_path, "forward", out="orig")
        assert code == 0
        replay_manifest(out / "manifest.json", tmp_path / "replayed")
        assert tree_bytes(out) == tree_bytes(tmp_path / "replayed")
        again = read_manifest(tmp_path / "replayed" / "manifest.json")
        orig = read_manifest(out / "manifest.json")
        assert again["config"] == orig["config"]
        assert again["seed"] == orig["seed"]

    def test_replay_respects_seed_override(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        assert main(["gradcheck", "--config", str(cfg),
                     "--out", str(tmp_path / "a"), "--seed", "7"]) == 0
        manifest = read_manifest(tmp_path / "a" / "manifest.json")
        assert manifest["seed"] == 7
        replay_manifest(tmp_path / "a" / "manifest.json", tmp_path / "b")
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


class TestGradcheck:
    def test_report_is_tight(self, tmp_path):
        code, out = run(tmp_path, "gradcheck")
        assert code == 0
        with (out / "gradcheck.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert {r["slot"] for r in rows} == {"u", "v", "eta", "joint"}
        assert len(rows) == 2 * 4  # n_directions * slots
        worst = max(float(r["rel_err"]) for r in rows)
        assert worst <= 1e-6
        manifest = read_manifest(out / "manifest.json")
        assert manifest["summary"]["max_rel_err"] == worst


class TestOptimizeCommand:
    def test_outputs_and_history(self, tmp_path):
        code, out = run(tmp_path, "optimize")
        assert code == 0
        for name in ("state.csv", "adjoint.csv", "controls_u.csv", "history.csv",
                     "stages.csv", "diagnostics.csv", "manifest.json"):
            assert (out / name).exists(), name
        with (out / "history.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        costs = [float(r["cost"]) for r in rows]
        assert all(b < a for a, b in zip(costs, costs[1:]))
        with (out / "stages.csv").open() as fh:
            stages = list(csv.DictReader(fh))
        assert len(stages) == 1
        assert float(stages[0]["zeta"]) >= 0.0

    def test_penalized_mode_anchors_at_config_controls(self, tmp_path):
        data = dict(SMALL, problem={"eps": 0.2, "sigma": 0.1})
        code, out = run(tmp_path, "optimize", data)
        assert code == 0
        with (out / "stages.csv").open() as fh:
            stages = list(csv.DictReader(fh))
        assert stages[0]["sigma"] == "0.10000000000000001"


class TestContinueCommand:
    def test_stage_layout(self, tmp_path):
        data = dict(SMALL, schedule={"eps_list": [0.2, 0.1], "sigma_list": [0.1]})
        code, out = run(tmp_path, "continue", data)
        assert code == 0
        with (out / "stages.csv").open() as fh:
            stages = list(csv.DictReader(fh))
        assert [(s["eps"], s["sigma"]) for s in stages] == [
            ("0.20000000000000001", ""),
            ("0.20000000000000001", "0.10000000000000001"),
            ("0.10000000000000001", ""),
            ("0.10000000000000001", "0.10000000000000001"),
        ]
        assert stages[0]["drift_u"] == ""
        assert stages[1]["drift_u"] != ""
        with (out / "history.csv").open() as fh:
            hist = list(csv.DictReader(fh))
        assert {h["stage"] for h in hist} == {"0", "1", "2", "3"}


class TestSweepCommand:
    def test_cell_directories(self, tmp_path):
        data = dict(SMALL, schedule={"eps_list": [0.2, 0.1], "sigma_list": [0.1]})
        code, out = run(tmp_path, "sweep", data)
        assert code == 0
        for cell in ("cell_00_00", "cell_01_00"):
            assert (out / cell / "state.csv").exists()
            assert (out / cell / "history.csv").exists()
        with (out / "stages.csv").open() as fh:
            stages = list(csv.DictReader(fh))
        assert len(stages) == 2
        manifest = read_manifest(out / "manifest.json")
        assert len(manifest["summary"]["cells"]) == 2


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        bad = dict(SMALL, bounds={"u_min": 1.0, "u_max": -1.0})
        code, _ = run(tmp_path, "forward", bad)
        assert code == 2

    def test_malformed_json_is_2(self, tmp_path):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{oops")
        assert main(["forward", "--config", str(cfg)]) == 2

    def test_solver_failure_is_3(self, tmp_path):
        hard = dict(
            SMALL,
            initial={"theta0": 1.5, "phi0": 0.3},
            tolerances={"newton_tol": 1e-300, "newton_max_iter": 1},
        )
        code, _ = run(tmp_path, "forward", hard)
        assert code == 3

    def test_missing_config_is_4(self, tmp_path):
        assert main(["forward", "--config", str(tmp_path / "absent.json")]) == 4

    def test_unwritable_out_is_4(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        assert main(["forward", "--config", str(cfg), "--out", str(blocker)]) == 4

    def test_success_is_0(self, tmp_path):
        code, _ = run(tmp_path, "forward")
        assert code == 0
