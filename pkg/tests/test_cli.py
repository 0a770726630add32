import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from apsflow.cli import (
    ToleranceSet,
    load_config,
    main,
    parse_config,
    run_suite,
)
from apsflow.errors import ConfigError


def write_config(path, **overrides):
    raw = {
        "family": {
            "kind": "linear",
            "parameters": {"a0_diagonal": [-0.5], "b_diagonal": [1.0]},
        },
        "propagator": {"steps": 128},
        "checks": ["flowind"],
        "output": {"path": str(path.parent / "out"), "formats": ["json"]},
    }
    raw.update(overrides)
    path.write_text(json.dumps(raw), encoding="utf-8")
    return raw


class TestConfigParsing:
    def test_defaults_filled(self, tmp_path):
        path = tmp_path / "config.json"
        write_config(path)
        config = load_config(str(path))
        assert config.steps == 128
        assert config.scheme == "midpoint-exponential"
        assert config.tolerances == ToleranceSet()
        assert config.checks == ("flowind",)

    def test_negative_tolerance_rejected(self):
        with pytest.raises(ConfigError, match="tau_0 must be positive"):
            parse_config(
                {
                    "family": {"kind": "constant", "parameters": {"matrix_diagonal": [1.0]}},
                    "tolerances": {"tau_0": -1e-9},
                    "checks": ["flowind"],
                }
            )

    def test_unknown_check_rejected(self):
        with pytest.raises(ConfigError, match="config.checks entry"):
            parse_config(
                {
                    "family": {"kind": "constant", "parameters": {"matrix_diagonal": [1.0]}},
                    "checks": ["mystery"],
                }
            )

    def test_empty_checks_rejected(self):
        with pytest.raises(ConfigError, match="nonempty"):
            parse_config(
                {
                    "family": {"kind": "constant", "parameters": {"matrix_diagonal": [1.0]}},
                    "checks": [],
                }
            )

    def test_unconstructible_family_rejected(self):
        with pytest.raises(ConfigError, match="lambda1"):
            parse_config(
                {
                    "family": {"kind": "swap-block", "parameters": {}},
                    "checks": ["flowind"],
                }
            )

    def test_growth_check_needs_counterexample_family(self):
        with pytest.raises(ConfigError, match="counterexample-growth"):
            parse_config(
                {
                    "family": {"kind": "constant", "parameters": {"matrix_diagonal": [1.0]}},
                    "checks": ["counterexample-growth"],
                }
            )

    def test_unknown_tolerance_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config(
                {
                    "family": {"kind": "constant", "parameters": {"matrix_diagonal": [1.0]}},
                    "tolerances": {"tau_fancy": 1.0},
                    "checks": ["flowind"],
                }
            )


class TestRunCommand:
    def test_passing_run_exit_zero(self, tmp_path):
        path = tmp_path / "config.json"
        write_config(path)
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(path)])
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["passed"] is True
        assert report["results"][0]["sfl"] == 1
        assert report["results"][0]["endpoint_pair_index"] == 1
        assert "_timings" not in report
        assert report["schema_version"] == 1
        assert report["artifact_version"]
        assert report["seed"] == 0
        assert len(report["results"]) == len(report["config"]["checks"])

    def test_malformed_config_exit_two_no_report(self, tmp_path):
        path = tmp_path / "config.json"
        write_config(path, tolerances={"gamma_min": -1.0})
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(path)])
        assert result.exit_code == 2
        assert not (tmp_path / "out" / "report.json").exists()

    def test_unparseable_json_exit_two(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(path)])
        assert result.exit_code == 2
        assert "line" in result.output

    def test_check_failure_exit_one_report_written(self, tmp_path):
        # a counterexample oracle comparison at 8 coarse midpoint steps
        # cannot reach the 1e-6 tolerance, so the check fails honestly
        path = tmp_path / "config.json"
        write_config(
            path,
            family={"kind": "counterexample", "parameters": {"m": 1}},
            propagator={"steps": 8, "scheme": "midpoint-exponential"},
            checks=["counterexample-growth"],
        )
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(path)])
        assert result.exit_code == 1
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["passed"] is False
        entry = report["results"][0]
        assert entry["closed_form_defect"] > entry["oracle_tolerance"]

    def test_reports_byte_identical(self, tmp_path):
        path = tmp_path / "config.json"
        write_config(path, checks=["flowind", "lorentzian-main"])
        runner = CliRunner()
        runner.invoke(main, ["run", "--config", str(path), "--seed", "3"])
        first = (tmp_path / "out" / "report.json").read_bytes()
        runner.invoke(main, ["run", "--config", str(path), "--seed", "3"])
        second = (tmp_path / "out" / "report.json").read_bytes()
        assert first == second

    def test_csv_traces_written(self, tmp_path):
        path = tmp_path / "config.json"
        write_config(
            path,
            checks=["flowind", "lorentzian-main", "riemannian-main"],
            output={"path": str(tmp_path / "out"), "formats": ["json", "csv"]},
        )
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(path)])
        assert result.exit_code == 0
        for name in ("eigenflow.csv", "crossings.csv", "unitarity_drift.csv", "singular_values.csv"):
            assert (tmp_path / "out" / name).exists()

    def test_strict_rejects_flagged_family(self, tmp_path):
        # sampled families always carry a piecewise-smoothness flag, which
        # strict mode promotes to a construction error
        path = tmp_path / "config.json"
        write_config(
            path,
            family={
                "kind": "custom-samples",
                "parameters": {
                    "times": [0.0, 1.0],
                    "matrices": [[[[0.0, 0.0]]], [[[1.0, 0.0]]]],
                },
            },
        )
        runner = CliRunner()
        relaxed = runner.invoke(main, ["run", "--config", str(path)])
        assert relaxed.exit_code == 0, relaxed.output
        strict = runner.invoke(main, ["run", "--config", str(path), "--strict"])
        assert strict.exit_code == 2
        assert "strict" in strict.output

    def test_tolerances_echoed_in_report(self, tmp_path):
        path = tmp_path / "config.json"
        write_config(path, tolerances={"gamma_min": 2e-6})
        runner = CliRunner()
        runner.invoke(main, ["run", "--config", str(path)])
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["config"]["tolerances"]["gamma_min"] == 2e-6
        assert report["results"][0]["tolerances"]["gamma_min"] == 2e-6


class TestShippedConfigs:
    CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

    @pytest.mark.parametrize(
        "name", ["constant-split", "scalar-crossing", "counterexample-growth"]
    )
    def test_shipped_configs_parse(self, name):
        config = load_config(str(self.CONFIG_DIR / f"{name}.json"))
        assert config.checks

    def test_constant_split_reports_zero_flow(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            main,
            [
                "run",
                "--config",
                str(self.CONFIG_DIR / "constant-split.json"),
                "--out",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["results"][0]["sfl"] == 0
        assert report["results"][0]["endpoint_pair_index"] == 0


class TestSuiteCommand:
    def test_counterexample_suite(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["suite", "counterexample", "--max-blocks", "2", "--out", str(tmp_path)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "suite-counterexample.json").read_text())
        rows = report["sections"]["counterexample"]
        assert [(e["blocks"], e["ker_dim"], e["index"], e["sfl"]) for e in rows] == [
            (1, 1, 0, 0),
            (2, 2, 0, 0),
        ]

    def test_random_suite_deterministic(self, tmp_path):
        a = run_suite("random", seed=7, families=4, max_dim=4, steps=128)
        b = run_suite("random", seed=7, families=4, max_dim=4, steps=128)
        from apsflow.reporting import canonical_json

        assert canonical_json(a) == canonical_json(b)
        assert a["passed"]

    def test_unknown_suite_rejected(self):
        runner = CliRunner()
        result = runner.invoke(main, ["suite", "nonsense"])
        assert result.exit_code == 2


class TestExportCommand:
    def test_eigenflow_export(self, tmp_path):
        path = tmp_path / "config.json"
        write_config(path, output={"path": str(tmp_path), "formats": ["json"]})
        runner = CliRunner()
        result = runner.invoke(
            main, ["export", "eigenflow", "--config", str(path), "--samples", "101"]
        )
        assert result.exit_code == 0
        lines = (tmp_path / "eigenflow.csv").read_text().strip().splitlines()
        assert lines[0] == "t,lambda_1"
        assert len(lines) == 102
        # the scalar eigenvalue t - 1/2 crosses zero at t = 0.5
        mid = [float(x) for x in lines[51].split(",")]
        assert mid[0] == pytest.approx(0.5) and abs(mid[1]) < 1e-12

    def test_propagator_export_matches_exponential(self, tmp_path):
        import scipy.linalg

        path = tmp_path / "config.json"
        write_config(
            path,
            family={"kind": "constant", "parameters": {"matrix_diagonal": [-1.0, 1.0]}},
            propagator={"steps": 32},
            output={"path": str(tmp_path), "formats": ["json"]},
        )
        runner = CliRunner()
        result = runner.invoke(main, ["export", "propagator", "--config", str(path)])
        assert result.exit_code == 0
        from apsflow.evolution import read_propagator

        prop = read_propagator(tmp_path / "propagator.json")
        expected = scipy.linalg.expm(1j * np.diag([-1.0, 1.0]))
        assert np.max(np.abs(prop.unitaries[-1] - expected)) < 1e-12

    def test_operator_export_dimensions(self, tmp_path):
        path = tmp_path / "config.json"
        write_config(
            path,
            family={
                "kind": "diagonal-path",
                "parameters": {"start": [-1.0, 1.0], "end": [-2.0, 2.0]},
            },
            output={"path": str(tmp_path), "formats": ["json"]},
        )
        runner = CliRunner()
        result = runner.invoke(
            main, ["export", "operator", "--config", str(path), "--grid", "16"]
        )
        assert result.exit_code == 0
        header = (tmp_path / "operator.txt").read_text().splitlines()[0]
        # rows M n; cols (M+1) n - rank P_>=0(0) - rank P_<0(T) = 34 - 1 - 1
        assert header == "# rows 32 cols 32"

    def test_missing_config_exit_two(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            main, ["export", "eigenflow", "--config", str(tmp_path / "nope.json")]
        )
        assert result.exit_code == 2
