import csv
import io
import json
import os
from pathlib import Path

import pytest

from gaplab.errors import InvalidParameter
from gaplab.harness import SweepConfig, engineer_crossings, fit_sweep, splitting_sweep
from gaplab.instance import Instance
from gaplab.reports import (
    SWEEP_HEADER,
    ReportError,
    atomic_write,
    dumps_json,
    emit_report,
    fmt_real,
    render,
)
from gaplab.spectrum import gap_curve

GOLDEN = Path(__file__).parent / "golden"
GOLDEN_SWEEP = SweepConfig(n_values=(16, 20), samples_per_n=8, master_seed=11, max_order=2,
                           min_pair_distance=5)


def golden_artifacts():
    """Outputs frozen under tests/golden; regenerate only on an intended format change."""
    sweep = splitting_sweep(GOLDEN_SWEEP)
    reports, _ = engineer_crossings(14, 1, seed=2, exact_check=False)
    return {
        "sweep.csv": render(sweep, "csv"),
        "fit.json": render(fit_sweep(sweep, 2), "json"),
        "crossing.json": render(reports[0], "json"),
    }


@pytest.fixture(scope="module")
def artifacts():
    return golden_artifacts()


class TestSchemas:
    def test_sweep_csv_header(self, artifacts):
        rows = list(csv.reader(io.StringIO(artifacts["sweep.csv"])))
        assert tuple(rows[0]) == SWEEP_HEADER == ("N", "m", "mean_sq_split", "stderr",
                                                  "samples", "discarded")
        assert len(rows) == 1 + 2 * GOLDEN_SWEEP.max_order
        assert {r[1] for r in rows[1:]} == {"1", "2"}

    def test_crossing_json_fields(self, artifacts):
        data = json.loads(artifacts["crossing.json"])
        for key in ("instance", "pair", "added_clause", "penalty", "lambda_ref", "lambda_c",
                    "series1", "series2", "curve", "tunneling", "v12_at_lambda_c", "kappa",
                    "gap_estimate", "skipped_clauses", "exact"):
            assert key in data

    def test_fit_json_fields(self, artifacts):
        data = json.loads(artifacts["fit.json"])
        assert {"slope", "intercept", "r_squared", "n_points"} <= set(data)

    def test_gap_curve_csv(self):
        text = render(gap_curve(Instance(2, ()), [0.5, 1.0]), "csv")
        assert text.splitlines()[0] == "lambda,gap,e0,e1"
        assert float(text.splitlines()[1].split(",")[1]) == pytest.approx(1.0)

    def test_unknown_schema(self):
        with pytest.raises(InvalidParameter):
            render({"a": 1}, "csv")
        with pytest.raises(InvalidParameter):
            render({"a": 1}, "yaml")


class TestGolden:
    @pytest.mark.parametrize("name", ["sweep.csv", "fit.json", "crossing.json"])
    def test_matches_frozen_output(self, artifacts, name):
        assert artifacts[name] == (GOLDEN / name).read_text()


class TestFormatting:
    def test_reals_round_trip(self):
        for x in (0.1, 1 / 3, 1e-300, 2.5e17):
            assert float(fmt_real(x)) == x

    def test_json_is_canonical(self):
        a = dumps_json({"b": [1.0, 2], "a": {"y": None, "x": float("nan")}})
        b = dumps_json({"a": {"x": float("nan"), "y": None}, "b": [1.0, 2]})
        assert a == b
        assert json.loads(a) == {"a": {"x": None, "y": None}, "b": [1.0, 2]}


class TestAtomicWrite:
    def test_overwrite(self, tmp_path):
        path = tmp_path / "out.json"
        emit_report({"v": 1}, path)
        emit_report({"v": 2}, path)
        assert json.loads(path.read_text()) == {"v": 2}
        assert [p.name for p in tmp_path.iterdir()] == ["out.json"]

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ReportError):
            atomic_write(tmp_path / "nope" / "x.txt", "data")

    def test_stdout(self, capsys):
        emit_report({"v": 3}, "-")
        assert json.loads(capsys.readouterr().out) == {"v": 3}
