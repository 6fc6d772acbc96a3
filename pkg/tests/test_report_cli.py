"""Scenario files, CSV output, figures, CLI exit codes."""

import importlib.resources as resources

import numpy as np
import pytest

from hypergameopt import cli, report
from hypergameopt.errors import MissingSeries, ParseError, UnknownMode


def data_path(name: str) -> str:
    return str(resources.files("hypergameopt") / "data" / name)


def write(tmp_path, text: str):
    path = tmp_path / "case.scn"
    path.write_text(text)
    return path


def test_parse_bundled_table1():
    sfile = report.parse_scenario_file(data_path("table1.scn"))
    assert sfile.system == "fan"
    assert [s.label for s in sfile.scenarios] == [
        "baseline", "true_manipulation", "perception_manipulation",
        "faulty_defender_anticipation", "double_bluff_manipulation"]
    assert all(s.budget == 0.1 for s in sfile.scenarios)


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        report.parse_scenario_file(tmp_path / "missing.scn")
    with pytest.raises(ParseError):
        report.parse_scenario_file(write(tmp_path, "no system here\n"))
    with pytest.raises(ParseError):
        report.parse_scenario_file(write(
            tmp_path, "system = fan\n[scenario]\nlabel = a\n[scenario]\nlabel = a\n"))
    with pytest.raises(UnknownMode):
        report.parse_scenario_file(write(
            tmp_path, "system = fan\n[scenario]\nmode = quantum\n"))
    with pytest.raises(ParseError):
        report.parse_scenario_file(write(
            tmp_path, "system = fan\n[scenario]\nmystery = 1\n"))
    with pytest.raises(ParseError):
        report.parse_scenario_file(write(
            tmp_path, "system = fan\n[scenario]\ndouble_bluff = maybe\n"))
    with pytest.raises(ParseError):
        report.parse_scenario_file(write(
            tmp_path, "system = fan\n[bad section]\n"))


def test_empty_scenario_list_gives_header_only(tmp_path):
    path = write(tmp_path, "system = fan\n")
    sfile, results = report.run_scenarios(path)
    csv = report.results_to_csv(sfile, results)
    assert csv == ",".join(report.FAN_COLUMNS) + "\n"


def test_run_table1_values_and_determinism(tmp_path):
    sfile, results = report.run_scenarios(data_path("table1.scn"), jobs=2)
    report.require_success(results)
    rounded = report.results_to_csv(sfile, results, ndigits=2)
    lines = rounded.splitlines()
    header = lines[0].split(",")
    row = dict(zip(header, lines[1].split(",")))
    assert row["label"] == "baseline"
    assert (row["m"], row["p"], row["power"]) == ("2.06", "3.85", "13.97")
    # rerunning yields byte-identical full-precision output
    sfile2, results2 = report.run_scenarios(data_path("table1.scn"), jobs=1)
    assert (report.results_to_csv(sfile, results)
            == report.results_to_csv(sfile2, results2))


def test_emit_figures_deterministic(tmp_path):
    sfile, results = report.run_scenarios(data_path("table1.scn"))
    out1 = tmp_path / "f1"
    out2 = tmp_path / "f2"
    paths1 = report.emit_figures(sfile, results, out1)
    paths2 = report.emit_figures(sfile, results, out2)
    names1 = sorted(p.name for p in paths1)
    assert "perception_manipulation_contours.svg" in names1
    for p1, p2 in zip(sorted(paths1), sorted(paths2)):
        assert p1.read_bytes() == p2.read_bytes()
    svg = next(p for p in paths1 if "perception" in p.name).read_text()
    assert svg.count("<circle") >= 2      # both optima marked
    assert "true optimum" in svg and "perceived optimum" in svg


def test_missing_series(tmp_path):
    spec = report.ScenarioSpec(label="x", mode="static")
    bad = report.ScenarioResult(spec=spec, trajectory=None)
    with pytest.raises(MissingSeries):
        report._hvac_figures(bad, tmp_path)


def test_hvac_figures_from_cached_run(tmp_path):
    from hypergameopt.acceptance import _hvac_runs

    _base, _static, (out, traj) = _hvac_runs(5)
    spec = report.ScenarioSpec(label="dyn5", mode="dynamic", horizon=5)
    res = report.ScenarioResult(spec=spec, outcome=out, trajectory=traj,
                                baseline_power=14.79)
    paths = report._hvac_figures(res, tmp_path)
    names = {p.name for p in paths}
    assert names == {"dyn5_temperatures.svg", "dyn5_delta_t.svg", "dyn5_dt0.svg"}
    body = (tmp_path / "dyn5_temperatures.svg").read_text()
    assert body.startswith("<svg") and "zone (true)" in body


def test_cli_run_and_round(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code = cli.main(["run", data_path("table1.scn"), "--out", str(out_dir),
                     "--round", "2", "--no-figures", "--jobs", "2"])
    assert code == 0
    csv_text = (out_dir / "table1.csv").read_text()
    assert "2.06,3.85,13.97" in csv_text.replace(", ", ",")


def test_cli_input_error(tmp_path):
    bad = write(tmp_path, "system = fan\n[scenario]\nmode = bogus\n")
    code = cli.main(["run", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    code = cli.main(["run", str(tmp_path / "nope.scn"), "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_solver_failure(tmp_path, monkeypatch):
    def boom(system, spec):
        return report.ScenarioResult(spec=spec, error="RuntimeError: no luck")

    monkeypatch.setattr(report, "run_one", boom)
    path = write(tmp_path, "system = fan\n[scenario]\nlabel = a\nmode = none\n")
    code = cli.main(["run", str(path), "--out", str(tmp_path / "o"),
                     "--no-figures"])
    assert code == 1
    csv_text = (tmp_path / "o" / "case.csv").read_text()
    assert "error: RuntimeError: no luck" in csv_text


def test_cli_log_env(monkeypatch, capsys):
    monkeypatch.setenv("HYPERGAME_OPT_LOG", "banana")
    cli._setup_logging()
    assert "HYPERGAME_OPT_LOG" in capsys.readouterr().err


def test_seed_is_accepted(tmp_path):
    sfile, results = report.run_scenarios(data_path("table1.scn"), seed=42)
    report.require_success(results)
    assert len(results) == 5
