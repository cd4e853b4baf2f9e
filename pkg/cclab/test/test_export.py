"""Tests for CSV and JSON output"""
import csv
import json

import numpy as np
import pytest

from cclab import export, fowler
from cclab.conformal import bubble


class TestGenerateOutputName:
    def test_parameters_in_order(self):
        assert (
            export.generate_output_name("scan", {"n": 3, "seed": 7, "instance": "fowler"})
            == "scan_n=3_seed=7_instance=fowler.csv"
        )

    def test_floats_round_trip(self):
        name = export.generate_output_name("fowler", {"epsilon": 0.1}, "json")
        assert name == "fowler_epsilon=0.10000000000000001.json"

    def test_unsafe_characters_are_removed(self):
        name = export.generate_output_name("kelvin", {"fixture": "a/b:c"})
        assert "/" not in name and ":" not in name


class TestWriteCsv:
    def test_header_and_rows(self, tmp_path):
        path = export.write_csv(
            tmp_path / "table.csv", ("a", "b", "c"), [[1, 0.5, True], [2, None, "x"]]
        )
        with path.open(newline="") as file:
            rows = list(csv.reader(file))
        assert rows == [["a", "b", "c"], ["1", "0.5", "true"], ["2", "", "x"]]

    def test_full_precision(self, tmp_path):
        path = export.write_csv(tmp_path / "table.csv", ("x",), [[1 / 3]])
        assert float(path.read_text().splitlines()[1]) == 1 / 3

    def test_refuses_to_overwrite(self, tmp_path):
        path = tmp_path / "table.csv"
        path.write_text("keep me")
        with pytest.raises(FileExistsError, match="already exists"):
            export.write_csv(path, ("x",), [[1]])
        assert path.read_text() == "keep me"

    def test_overwrite(self, tmp_path):
        path = tmp_path / "table.csv"
        path.write_text("replace me")
        export.write_csv(path, ("x",), [[1]], overwrite=True)
        assert path.read_text().splitlines() == ["x", "1"]

    def test_ragged_row(self, tmp_path):
        with pytest.raises(ValueError, match="Row 1"):
            export.write_csv(tmp_path / "table.csv", ("x", "y"), [[1, 2], [3]])


class TestWriters:
    def test_trajectory(self, tmp_path):
        params = fowler.FowlerParams.from_fraction(3, 0.5)
        trajectory = fowler.integrate(params, 0.0, 1.0, 0.25)
        path = export.write_trajectory(trajectory, tmp_path / "orbit.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "t,v,w,H"
        assert len(lines) == 1 + len(trajectory.t)

    def test_factor_samples(self, tmp_path):
        points = np.array([[0.1, 0.2, 0.3], [1.0, 0.0, 0.0]])
        path = export.write_factor_samples(bubble(3, 1.0), points, tmp_path / "u.csv")
        with path.open(newline="") as file:
            header, *rows = list(csv.reader(file))
        assert header == ["x1", "x2", "x3", "u", "du_dx1", "du_dx2", "du_dx3", "laplacian"]
        assert len(rows) == 2
        assert float(rows[1][3]) == pytest.approx(1.0)

    def test_period_table(self, tmp_path):
        rows = fowler.period_table(4, (0.5, 1.0))
        path = export.write_period_table(rows, tmp_path / "periods.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "fraction,epsilon,period"
        assert lines[2].split(",")[0] == "1"
        assert lines[2].split(",")[2] == "nan"


class TestJson:
    def test_keys_are_sorted_and_nan_is_null(self):
        text = export.to_json({"b": float("nan"), "a": np.float64(0.5), "c": [np.int64(3)]})
        assert json.loads(text) == {"a": 0.5, "b": None, "c": [3]}
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')

    def test_arrays_and_bools(self):
        text = export.to_json({"x": np.array([1.0, np.inf]), "ok": np.bool_(True)})
        assert json.loads(text) == {"ok": True, "x": [1.0, None]}

    def test_identical_reports_give_identical_text(self):
        report = {"lambda0": 0.1 + 0.2, "rows": [{"w": -1e-300}]}
        assert export.to_json(report) == export.to_json(dict(reversed(report.items())))

    def test_write_json(self, tmp_path):
        path = export.write_json({"n": 3}, tmp_path / "report.json")
        assert json.loads(path.read_text()) == {"n": 3}
        with pytest.raises(FileExistsError):
            export.write_json({"n": 4}, path)
