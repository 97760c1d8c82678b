"""Tests for the command-line interface and report rendering."""

import json

import pandas as pd
import pytest

from cloudcontrol.__main__ import main
from cloudcontrol.config import get_config
from cloudcontrol.error_handling import (
    EXIT_ASSUMPTION,
    EXIT_DIVERGENCE,
    EXIT_FAILURE,
    EXIT_NO_SELECTION,
    EXIT_OK,
    EXIT_SCHEMA,
    EXIT_USAGE,
    error_handler,
)
from cloudcontrol.scenario import dump_scenario, load_scenario


@pytest.fixture
def write_scenario(tmp_path):
    """Write a modified copy of a bundled scenario and return its path."""

    def _write(base: str, edit) -> str:
        data = json.loads(dump_scenario(load_scenario(base)))
        edit(data)
        path = tmp_path / f"{data['name']}-edited.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return _write


def _run_json(capsys, argv):
    assert main([*argv, "--format", "json"]) == EXIT_OK
    return json.loads(capsys.readouterr().out)


class TestSignalingCommand:
    """Test the signaling subcommand."""

    def test_text_report(self, capsys):
        """Test the listing marks the selected equilibrium."""
        assert main(["signaling", "--scenario", "fig4-family", "--p", "0.1"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "Signaling equilibria at p = 0.1" in out
        assert "*Equilibrium #8: pool on high" in out
        assert " Equilibrium #3: pool on low" in out
        assert "Quadrant: I" in out
        assert "Selected: Equilibrium #8" in out

    def test_json_report(self, capsys):
        """Test the JSON report fields."""
        report = _run_json(capsys, ["signaling", "--scenario", "fig4-family", "--p", "0.1"])
        assert [e["equilibrium_id"] for e in report["equilibria"]] == [3, 8]
        assert report["selected_id"] == 8
        assert report["tb_high"] == pytest.approx(1.5)
        assert report["tb_low"] == pytest.approx(0.95)
        assert report["provenance"]["scenario"] == "fig4-family"
        assert report["provenance"]["version"] == "0.1.0"

    def test_axis_label(self, capsys):
        """Test the quadrant label on the TB_H = 0 axis."""
        report = _run_json(capsys, ["signaling", "--scenario", "fig4-family", "--p", "0.4"])
        assert report["quadrant"] == "I/IV"
        assert report["selected_id"] == 3

    def test_enumerate_reports_instead_of_failing(self, capsys):
        """Test a failed selection is shown, not raised."""
        report = _run_json(
            capsys,
            ["signaling", "--scenario", "fig4-family", "--p", "0.1", "--policy", "enumerate"],
        )
        assert report["selected_id"] is None
        assert "Enumerate policy" in report["selection_error"]
        assert len(report["equilibria"]) == 2

    def test_csv_output(self, capsys):
        """Test the CSV rendering starts with the provenance line."""
        args = ["signaling", "--scenario", "fig4-family", "--p", "0.1", "--format", "csv"]
        assert main(args) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# scenario_hash=")
        assert lines[1].startswith("equilibrium_id,label,")
        assert len(lines) == 4

    def test_out_directory(self, tmp_path, capsys):
        """Test the report and tables written to --out."""
        out = tmp_path / "signaling"
        args = ["signaling", "--scenario", "fig4-family", "--p", "0.6", "--out", str(out)]
        assert main(args) == EXIT_OK
        report = json.loads((out / "signaling.json").read_text(encoding="utf-8"))
        assert report["selected_id"] == 3
        path = pd.read_csv(out / "trust_benefit_path.csv", comment="#")
        assert len(path) == 1001
        assert list(path.columns) == ["p", "tb_high", "tb_low", "quadrant"]
        assert (out / "equilibria.csv").exists()


class TestOtherCommands:
    """Test flipit, gestalt, simulate and vehicle."""

    def test_flipit_with_values(self, capsys):
        """Test an explicit value pair."""
        report = _run_json(
            capsys,
            ["flipit", "--scenario", "fig4-family", "--value-defender", "2", "--value-attacker", "1"],
        )
        assert report["case_name"] == "defender_favored"
        assert report["freq_defender"] == pytest.approx(2.0)
        assert report["control_ratio"] == pytest.approx(0.25)

    def test_flipit_values_from_signaling(self, capsys):
        """Test missing values come from the selected equilibrium."""
        report = _run_json(capsys, ["flipit", "--scenario", "fig4-family", "--p", "0.6"])
        assert (report["value_defender"], report["value_attacker"]) == (1.5, 0.5)
        assert report["control_ratio"] == pytest.approx(1.0 / 6.0)

    def test_flipit_text(self, capsys):
        """Test the text rendering."""
        args = ["flipit", "--scenario", "quadrant-one", "--value-defender", "1", "--value-attacker", "1"]
        assert main(args) == EXIT_OK
        out = capsys.readouterr().out
        assert "Case 3: balanced" in out
        assert "Control ratio p: 0.5" in out

    def test_gestalt_certified(self, capsys):
        """Test the quadrant-one fixed point."""
        report = _run_json(capsys, ["gestalt", "--scenario", "quadrant-one"])
        (solution,) = report["solutions"]
        assert solution["certified"] is True
        assert solution["p_dagger"] == pytest.approx(0.5)
        assert solution["equilibrium_id"] == 8
        assert report["branches"] is None

    def test_gestalt_curves_and_candidate(self, tmp_path, capsys):
        """Test the jump candidate and the curve tables."""
        out = tmp_path / "gestalt"
        assert main(["gestalt", "--scenario", "fig4-family", "--out", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "boundary candidate" in text
        assert "left: Equilibrium #8" in text
        assert len(pd.read_csv(out / "curve_signaling.csv", comment="#")) == 1001
        assert (out / "curve_flipit.csv").exists()
        assert (out / "solutions.csv").exists()

    def test_grid_flag_reaches_config_and_scan(self, tmp_path, capsys):
        """Test --grid is installed in the runtime config and sizes the curve tables."""
        out = tmp_path / "gestalt"
        argv = ["gestalt", "--scenario", "quadrant-one", "--grid", "301", "--out", str(out)]
        assert main(argv) == EXIT_OK
        capsys.readouterr()
        assert get_config().grid_resolution == 301
        assert len(pd.read_csv(out / "curve_signaling.csv", comment="#")) == 301

    def test_gestalt_enumerate_branches(self, capsys):
        """Test the per-equilibrium fixed points."""
        report = _run_json(
            capsys, ["gestalt", "--scenario", "fig4-family", "--policy", "enumerate"]
        )
        assert report["branches"]["Equilibrium #8"] == []
        assert report["branches"]["Equilibrium #3"] == [pytest.approx(1.0 / 6.0, abs=1e-8)]

    def test_simulate(self, capsys):
        """Test the no-attack replay."""
        report = _run_json(capsys, ["simulate", "--scenario", "no-attack", "--seed", "5"])
        assert report["mode"] == "cloudcontrol"
        assert report["empirical_p"] == 0.0
        assert report["payoff_receiver"] == 2.0
        assert report["provenance"]["seed"] == 5

    def test_vehicle(self, capsys):
        """Test the quadrant-one trajectory summary."""
        report = _run_json(capsys, ["vehicle", "--scenario", "quadrant-one"])
        assert report["steps"] == 1000
        assert report["stable"] is True
        assert report["attacker_probability"] == 0.5
        assert report["trust_given_high"] == 1.0
        assert report["eigenvalues"] == [[pytest.approx(-1.0), 0.0], [pytest.approx(-1.0), 0.0]]

    def test_vehicle_trajectory_table(self, tmp_path, capsys):
        """Test the per-step CSV."""
        out = tmp_path / "vehicle"
        args = ["vehicle", "--scenario", "fig4-family", "--p", "0", "--out", str(out)]
        assert main(args) == EXIT_OK
        frame = pd.read_csv(out / "trajectory.csv", comment="#")
        assert len(frame) == 1001
        assert set(frame["owner"].dropna()) == {"defender"}


class TestExitCodes:
    """Test the documented exit codes."""

    def test_missing_scenario_argument(self):
        """Test argparse usage errors."""
        with pytest.raises(SystemExit) as exc_info:
            main(["signaling", "--p", "0.1"])
        assert exc_info.value.code == EXIT_USAGE

    def test_prior_out_of_range(self):
        """Test that --p is checked by the parser."""
        with pytest.raises(SystemExit) as exc_info:
            main(["signaling", "--scenario", "fig4-family", "--p", "1.5"])
        assert exc_info.value.code == EXIT_USAGE

    def test_unknown_scenario(self, capsys):
        """Test a scenario that cannot be found."""
        assert main(["gestalt", "--scenario", "no-such-scenario"]) == EXIT_SCHEMA
        assert "Scenario not found" in capsys.readouterr().err

    def test_malformed_scenario(self, tmp_path, capsys):
        """Test a file that is not valid JSON."""
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        assert main(["gestalt", "--scenario", str(path)]) == EXIT_SCHEMA
        assert "Check the scenario file" in capsys.readouterr().err

    def test_missing_block(self, capsys):
        """Test the vehicle command on a scenario without a vehicle block."""
        assert main(["vehicle", "--scenario", "no-attack"]) == EXIT_SCHEMA

    def test_no_selection(self, write_scenario, capsys):
        """Test the enumerate policy cannot derive FlipIt values at a tie."""

        def edit(data):
            data["policies"]["selection"] = "enumerate"

        path = write_scenario("fig4-family", edit)
        assert main(["flipit", "--scenario", path, "--p", "0.1"]) == EXIT_NO_SELECTION
        err = capsys.readouterr().err
        assert "(p = 0.1)" in err
        assert "enumerate policy" in err

    def test_divergence(self, write_scenario, capsys):
        """Test an unstable controller stops the trajectory."""

        def edit(data):
            data["vehicle"]["gains"] = {"k1": "-1", "k2": "0"}
            data["vehicle"]["divergence_bound"] = "10"

        path = write_scenario("quadrant-one", edit)
        assert main(["vehicle", "--scenario", path]) == EXIT_DIVERGENCE
        assert "diverged" in capsys.readouterr().err

    def test_assumption_violation(self, write_scenario, capsys):
        """Test a receiver that prefers rejecting a defender's message."""

        def edit(data):
            data["signaling"]["receiver"]["defender"]["low"]["trust"] = "-1"

        path = write_scenario("fig4-family", edit)
        assert main(["signaling", "--scenario", path, "--p", "0.5"]) == EXIT_ASSUMPTION
        assert "A1-A4" in capsys.readouterr().err

    def test_nothing_to_replay(self, write_scenario, capsys):
        """Test a CloudControl replay without a certified equilibrium."""

        def edit(data):
            data["simulation"]["mode"] = "cloudcontrol"

        path = write_scenario("fig4-family", edit)
        assert main(["simulate", "--scenario", path]) == EXIT_FAILURE
        assert "no certified Gestalt equilibrium" in capsys.readouterr().err

    def test_invalid_environment(self, monkeypatch, capsys):
        """Test a bad CLOUDCONTROL_LOG_LEVEL is a configuration error."""
        monkeypatch.setenv("CLOUDCONTROL_LOG_LEVEL", "LOUD")
        assert main(["flipit", "--scenario", "fig4-family"]) == EXIT_FAILURE
        assert "Configuration error" in capsys.readouterr().err

    def test_debug_summary_reports_error_metrics(self, capsys):
        """Test a failed run counts its error once and summarises it at DEBUG."""
        argv = ["gestalt", "--scenario", "no-such-scenario", "--log-level", "DEBUG"]
        assert main(argv) == EXIT_SCHEMA
        err = capsys.readouterr().err
        assert "Errors this run: 1 by category {'SCHEMA': 1}" in err
        assert error_handler.get_metrics()["total_errors"] == 1
        assert error_handler.get_recent_errors(limit=1)[0]["error"]["context"]["operation"] == "gestalt"

    def test_debug_summary_after_success(self, capsys):
        """Test a clean run reports no errors."""
        args = ["flipit", "--scenario", "quadrant-one", "--value-defender", "1", "--value-attacker", "1"]
        assert main([*args, "--log-level", "DEBUG"]) == EXIT_OK
        assert "Errors this run: 0" in capsys.readouterr().err
