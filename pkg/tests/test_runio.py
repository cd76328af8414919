"""Output formats: float round trips, snapshot headers, manifests."""

import csv
import json

import numpy as np
import pytest

from pfcontrol.runio import (
    fmt,
    read_manifest,
    read_snapshot,
    write_csv,
    write_history_csv,
    write_manifest,
    write_snapshot,
)
from pfcontrol.optimize import IterationRecord


class TestFormatting:
    def test_float_text_round_trip(self):
        rng = np.random.default_rng(0)
        values = np.concatenate([
            rng.standard_normal(100) * 10.0 ** rng.integers(-12, 12, 100),
            [0.0, -0.0, 1.0, np.pi, 1e-300, 1e300],
        ])
        for x in values:
            assert float(fmt(x)) == float(x)

    def test_csv_cells(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ["a", "b", "c"], [[1, 0.1, "tag"], [2, np.float64(0.25), ""]])
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["a", "b", "c"]
        assert rows[1] == ["1", "0.10000000000000001", "tag"]
        assert rows[2] == ["2", "0.25", ""]
        assert path.read_bytes().endswith(b"\n")


class TestSnapshots:
    def test_round_trip_1d(self, tmp_path):
        path = tmp_path / "f.bin"
        values = np.linspace(-1, 1, 9)
        write_snapshot(path, values, (9,))
        dim, counts, back = read_snapshot(path)
        assert dim == 1
        assert counts == (9,)
        assert np.array_equal(back, values)

    def test_round_trip_2d(self, tmp_path):
        path = tmp_path / "f.bin"
        rng = np.random.default_rng(1)
        values = rng.standard_normal(12)
        write_snapshot(path, values, (3, 4))
        dim, counts, back = read_snapshot(path)
        assert dim == 2
        assert counts == (3, 4)
        assert np.array_equal(back, values)

    def test_write_read_write_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        values = np.array([1.0, -2.5, 3.25, 1e-9])
        write_snapshot(a, values, (4,))
        _, counts, back = read_snapshot(a)
        write_snapshot(b, back, counts)
        assert a.read_bytes() == b.read_bytes()

    def test_header_guard(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(ValueError):
            read_snapshot(path)
        with pytest.raises(ValueError):
            write_snapshot(tmp_path / "x.bin", np.zeros(4), (2, 3))
        with pytest.raises(ValueError):
            write_snapshot(tmp_path / "y.bin", np.zeros(4), (2, 2, 1))

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "f.bin"
        write_snapshot(path, np.arange(6, dtype=float), (6,))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            read_snapshot(path)


class TestHistoryCsv:
    def test_stage_labels(self, tmp_path):
        path = tmp_path / "h.csv"
        h0 = [IterationRecord(0, 3.0, 1e-1), IterationRecord(1, 2.0, 1e-2, 0.5, 1)]
        h1 = [IterationRecord(0, 1.5, 1e-3)]
        write_history_csv(path, [h0, h1], [(0, 0.1, None), (1, 0.1, 0.05)])
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["stage", "eps", "sigma", "iteration", "cost",
                           "residual", "step_size", "backtracks"]
        assert len(rows) == 4
        assert rows[1][0] == "0" and rows[1][2] == ""
        assert rows[3][0] == "1" and rows[3][2] == fmt(0.05)
        assert rows[2][7] == "1"


class TestManifest:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "manifest.json"
        config = {"time": {"nt": 3}, "seed": 5}
        summary = {"min_theta": 1.0}
        write_manifest(path, "forward", config, 5, summary, 0.123)
        back = read_manifest(path)
        assert back["command"] == "forward"
        assert back["seed"] == 5
        assert back["config"] == config
        assert back["summary"] == summary
        assert isinstance(back["version"], str)
        assert back["wall_seconds"] == 0.123
        data = json.loads(path.read_text())
        assert list(data) == sorted(data)
