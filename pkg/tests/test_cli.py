"""Scenario runner: exit codes, determinism, report contents."""

import json
import subprocess
import sys

import pytest

from ovmkit import cli, ovm
from ovmkit.models import lebesgue_identity, single_atom_measure

LEBESGUE_SCENARIO = {
    "kind": "attain",
    "ovm": {"model": "lebesgue_identity", "dim": 2, "cells": 16},
    "target": {"total_fraction": 0.5},
}


class TestRunScenario:
    def test_attain_passes(self):
        report, code = cli.run_scenario(dict(LEBESGUE_SCENARIO))
        assert code == 0
        assert report["pass"] is True
        assert report["schema"] == "ovm-report/1"
        residual = next(c for c in report["checks"] if c["name"] == "residual")
        assert residual["value"] <= 1e-9

    def test_unknown_key_rejected(self):
        scenario = dict(LEBESGUE_SCENARIO, bogus=1)
        report, code = cli.run_scenario(scenario)
        assert code == 1
        assert "bogus" in report["error"]

    def test_unknown_kind_rejected(self):
        report, code = cli.run_scenario({"kind": "nope"})
        assert code == 1
        assert "nope" in report["error"]

    def test_malformed_config_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        report, code = cli.run_scenario(str(path))
        assert code == 1

    def test_config_file_round(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(LEBESGUE_SCENARIO), encoding="utf-8")
        report, code = cli.run_scenario(str(path))
        assert code == 0

    def test_byte_identical_reruns(self):
        scenario = {"kind": "convexity",
                    "ovm": {"model": "random_povm", "dim": 2, "cells": 12, "seed": 4},
                    "trials": 20, "seed": 4}
        first, _ = cli.run_scenario(dict(scenario))
        second, _ = cli.run_scenario(dict(scenario))
        assert cli.report_to_json(first) == cli.report_to_json(second)

    def test_report_echo_reruns(self):
        report, _ = cli.run_scenario(dict(LEBESGUE_SCENARIO))
        again, code = cli.run_scenario(report["scenario"])
        assert code == 0
        assert cli.report_to_json(again) == cli.report_to_json(report)

    def test_target_outside_hull_fails_checks(self):
        scenario = dict(LEBESGUE_SCENARIO, target={"total_fraction": 2.0})
        report, code = cli.run_scenario(scenario)
        assert code == 2
        assert "TargetNotInHull" in report["results"]["error"]


class TestKinds:
    def test_paper_example_13(self):
        report, code = cli.run_scenario({"kind": "paper_example_13", "levels": 8})
        assert code == 0
        rows = report["results"]["cells"]
        assert len(rows) == 8
        top = next(r for r in rows if r["n"] == 1)
        assert top["density"] == pytest.approx(0.75, abs=1e-12)
        assert top["rn_entry_nn"] == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert report["results"]["display_formula_discrepancy"]["flagged"] is True

    def test_uhl(self):
        report, code = cli.run_scenario({"kind": "uhl", "cells": 8})
        assert code == 0
        assert report["results"]["kernel_witnesses_found"] == 0
        assert report["results"]["min_distance_to_half_total"] == pytest.approx(0.5)
        assert report["results"]["properties"]["spectral"] is True

    def test_uhl_bad_cells(self):
        report, code = cli.run_scenario({"kind": "uhl", "cells": 1})
        assert code == 1

    def test_paper_example_13_bad_levels(self):
        report, code = cli.run_scenario({"kind": "paper_example_13", "levels": 50})
        assert code == 1

    def test_singular(self):
        report, code = cli.run_scenario(
            {"kind": "singular_34", "measures": 4, "lambdas": [0.1, 0.5, 0.9, 0.3]})
        assert code == 0
        assert report["results"]["achieved_diagonal"] == pytest.approx(
            [0.1, 0.5, 0.9, 0.3], abs=1e-9)

    def test_singular_extremes(self):
        report, code = cli.run_scenario(
            {"kind": "singular_34", "measures": 3, "lambdas": [0.0, 0.0, 0.0]})
        assert code == 0
        assert report["results"]["attain"]["intervals"] == []
        report, code = cli.run_scenario(
            {"kind": "singular_34", "measures": 3, "lambdas": [1.0, 1.0, 1.0]})
        assert code == 0
        assert report["results"]["attain"]["intervals"] == [[0.0, 1.0]]

    def test_singular_bad_lambda(self):
        report, code = cli.run_scenario(
            {"kind": "singular_34", "measures": 2, "lambdas": [0.5, 1.5]})
        assert code == 1

    def test_classical(self):
        report, code = cli.run_scenario(
            {"kind": "classical", "measures": 3, "cells": 32, "trials": 5, "seed": 2})
        assert code == 0
        assert all(row["fractional_count"] <= 3 for row in report["results"]["targets"])

    def test_classical_atomic_exit_two(self):
        atom = single_atom_measure()
        scenario = {"kind": "classical",
                    "measures": [ovm.ovm_to_json(atom)],
                    "targets": [[0.5]]}
        report, code = cli.run_scenario(scenario)
        assert code == 2
        assert "AtomicObstruction" in report["checks"][0]["value"]

    def test_properties_with_expectations(self):
        scenario = {"kind": "properties",
                    "ovm": {"model": "lebesgue_identity", "dim": 2, "cells": 4},
                    "expect": {"positive": True, "spectral": False,
                               "probability": True}}
        report, code = cli.run_scenario(scenario)
        assert code == 0
        assert report["results"]["properties"]["spectral"] is False

    def test_properties_expectation_failure(self):
        scenario = {"kind": "properties",
                    "ovm": {"model": "lebesgue_identity", "dim": 2, "cells": 4},
                    "expect": {"spectral": True}}
        report, code = cli.run_scenario(scenario)
        assert code == 2

    def test_convexity_atomic_expected_failures(self):
        scenario = {"kind": "convexity", "ovm": {"model": "single_atom"},
                    "trials": 25, "seed": 3, "expect": {"failures": 25}}
        report, code = cli.run_scenario(scenario)
        assert code == 0
        assert len(report["results"]["failures"]) == 25


class TestSerialization:
    def test_report_key_sorted(self):
        report, _ = cli.run_scenario(dict(LEBESGUE_SCENARIO))
        text = cli.report_to_json(report)
        parsed = json.loads(text)
        assert list(parsed) == sorted(parsed)
        assert text == cli.report_to_json(parsed)

    def test_csv_17_digits(self):
        report, _ = cli.run_scenario({"kind": "uhl", "cells": 4})
        text = cli.report_to_csv(report)
        assert text.splitlines()[0].startswith("cells,")
        assert "0.5" in text

    def test_csv_float_formatting(self):
        assert cli._fmt(1 / 3) == "0.33333333333333331"

    def test_write_report_atomic(self, tmp_path):
        out = tmp_path / "sub" / "report.json"
        cli.write_report("hello\n", str(out))
        assert out.read_text(encoding="utf-8") == "hello\n"
        leftovers = [p for p in out.parent.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []


class TestMain:
    def test_main_attain(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = cli.main(["attain", "--dim", "2", "--cells", "8", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["pass"] is True

    def test_main_run_config(self, tmp_path):
        config = tmp_path / "scenario.json"
        config.write_text(json.dumps(LEBESGUE_SCENARIO), encoding="utf-8")
        out = tmp_path / "r.json"
        code = cli.main(["run", "--config", str(config), "--out", str(out)])
        assert code == 0

    def test_main_byte_identical_files(self, tmp_path):
        config = tmp_path / "scenario.json"
        config.write_text(json.dumps({"kind": "convexity",
                                      "ovm": {"model": "random_povm", "dim": 2,
                                              "cells": 10, "seed": 5},
                                      "trials": 10, "seed": 5}), encoding="utf-8")
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        assert cli.main(["run", "--config", str(config), "--out", str(out1)]) == 0
        assert cli.main(["run", "--config", str(config), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_main_csv_format(self, tmp_path):
        out = tmp_path / "r.csv"
        code = cli.main(["paper-example-13", "--levels", "4",
                         "--format", "csv", "--out", str(out)])
        assert code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("n,cell_lo")
        assert len(lines) == 5

    def test_console_entry_point(self, tmp_path):
        config = tmp_path / "s.json"
        config.write_text(json.dumps({"kind": "uhl", "cells": 4}), encoding="utf-8")
        proc = subprocess.run(
            [sys.executable, "-m", "ovmkit.cli", "run", "--config", str(config)],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["pass"] is True

    def test_missing_config_is_error(self, tmp_path):
        code = cli.main(["run", "--config", str(tmp_path / "absent.json")])
        assert code == 1


class TestOvmLoading:
    def test_inline_json(self):
        nu = lebesgue_identity(4, 2)
        report, code = cli.run_scenario({
            "kind": "attain",
            "ovm": ovm.ovm_to_json(nu),
            "target": {"total_fraction": 0.25},
        })
        assert code == 0

    def test_path_loading(self, tmp_path):
        nu = lebesgue_identity(4)
        path = tmp_path / "measure.json"
        path.write_text(json.dumps(ovm.ovm_to_json(nu)), encoding="utf-8")
        report, code = cli.run_scenario({
            "kind": "attain",
            "ovm": str(path),
            "target": {"total_fraction": 0.5},
        })
        assert code == 0

    def test_explicit_matrix_target(self):
        report, code = cli.run_scenario({
            "kind": "attain",
            "ovm": {"model": "lebesgue_identity", "dim": 2, "cells": 8},
            "target": {"dim": 2, "re": [[0.5, 0.0], [0.0, 0.5]],
                       "im": [[0.0, 0.0], [0.0, 0.0]]},
        })
        assert code == 0

    def test_unknown_model(self):
        report, code = cli.run_scenario({
            "kind": "attain", "ovm": {"model": "nope"},
            "target": {"total_fraction": 0.5}})
        assert code == 1
