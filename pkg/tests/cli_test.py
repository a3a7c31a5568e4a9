import csv
import json

import pytest
from click.testing import CliRunner

from lambdasym import __version__
from lambdasym.bin import cli
from lambdasym.core.expr import H, normalize, u_
from lambdasym.core.parser import parse
from lambdasym.core.report import CheckReport, RunReport


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def _run(*args):
        output = tmp_path / "report.json"
        if output.exists():
            output.unlink()
        result = runner.invoke(cli, [*args, "-o", str(output)])
        report = json.loads(output.read_text(encoding="utf-8")) if output.exists() else None
        return result, report

    return _run


def test_check_passes(run):
    result, report = run("check", "ex2", "--chi", "1 + h*u[0]")
    assert result.exit_code == 0
    assert report["passed"]
    assert report["version"] == __version__
    assert report["schema_version"] == 1
    assert report["results"]["check"]["verdict"] == "zero"
    assert report["inputs"]["chi"] == "h*u[0] + 1"


def test_check_fails_with_exit_code_two(run):
    result, report = run("check", "ex2", "--chi", "1")
    assert result.exit_code == 2
    assert not report["passed"]
    assert report["results"]["check"]["max_residual"] >= 1e-4


def test_check_accepts_lambda(run):
    result, report = run("check", "ex2", "--lambda", "log(1 + h*u[0])/h")
    assert result.exit_code == 0
    assert report["passed"]


def test_check_usage_errors(run):
    result, _ = run("check", "ex2", "--chi", "1", "--lambda", "0")
    assert result.exit_code == 1
    result, _ = run("check", "ex2")
    assert result.exit_code == 1
    result, _ = run("check", "no-such-scheme", "--chi", "1")
    assert result.exit_code == 1


def test_check_reports_parse_errors_with_columns(run):
    result, report = run("check", "ex2", "--chi", "1 + h*u[0")
    assert result.exit_code == 1
    assert report is None
    assert "1:10" in result.output


def test_check_text_report(tmp_path):
    output = tmp_path / "report.txt"
    result = CliRunner().invoke(cli, ["check", "ex2", "--chi", "1 + h*u[0]", "--emit", "text", "-o", str(output)])
    assert result.exit_code == 0
    text = output.read_text(encoding="utf-8")
    assert text.startswith("check ex2: PASS")
    assert "verdict = zero" in text


def test_find(run):
    result, report = run("find", "ex2", "--chi-degree", "1")
    assert result.exit_code == 0
    assert report["results"]["found"] == 1
    symmetry = report["results"]["symmetries"][0]
    assert normalize(parse(symmetry["chi"]) - (1 + H * u_(0))) == 0
    assert symmetry["coefficients"] == {"c0": "1", "c1": "h"}


def test_find_none(run):
    result, report = run("find", "ex2", "-d", "0")
    assert result.exit_code == 0
    assert report["passed"]
    assert report["results"]["found"] == 0
    assert report["results"]["message"] == "none found up to degree 0"


def test_find_trivial(run):
    result, report = run("find", "trivial", "-d", "0")
    assert result.exit_code == 0
    assert [sym["chi"] for sym in report["results"]["symmetries"]] == ["1"]


def test_find_rejects_large_degrees(run):
    result, _ = run("find", "ex2", "-d", "7")
    assert result.exit_code == 1


def test_reduce(run):
    result, report = run("reduce", "ex2", "--verify-trials", "20", "--steps", "100")
    assert result.exit_code == 0
    results = report["results"]
    assert normalize(parse(results["invariant"]["v"]) - (u_(1) - u_(0) - H * u_(0) ** 2 / 2)) == 0
    assert results["reduced"]["method"] == "symbolic"
    assert results["verification"]["status"] == "pass"


def test_reduce_conservation(run):
    result, report = run("reduce", "ex1-exp")
    assert result.exit_code == 0
    assert report["results"]["reduced"]["R"] == "v"
    assert report["results"]["verification"]["conservation"] <= 1e-10


def test_reduce_with_a_wrong_multiplier(run):
    result, report = run("reduce", "ex2", "--chi", "1")
    assert result.exit_code == 2
    assert report["results"]["message"] == "not reducible by this invariant"


def test_evolve(tmp_path):
    output = tmp_path / "trajectory.csv"
    result = CliRunner().invoke(
        cli, ["evolve", "ex2", "--init", "0.2", "--init", "0.3", "--steps", "10", "-o", str(output)]
    )
    assert result.exit_code == 0
    with open(output, encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["n", "u_n", "v_n"]
    assert len(rows) == 13
    assert float(rows[1][1]) == 0.2
    assert float(rows[1][2]) == pytest.approx(0.3 - 0.2 - 0.05 * 0.2**2)
    assert rows[-1][2] == ""


def test_limit(run):
    result, report = run("limit", "--lambda", "u", "--h-start", "0.1", "--levels", "4")
    assert result.exit_code == 0
    ratios = report["results"]["convergence"]["ratios"]
    assert len(ratios) == 3
    assert all(1.6 <= r <= 2.4 for r in ratios)

    result, report = run("limit", "--lambda", "0")
    assert result.exit_code == 0
    assert report["results"]["convergence"]["exact"]


def test_limit_needs_three_levels(run):
    result, _ = run("limit", "--levels", "1")
    assert result.exit_code == 1


def test_reports_are_deterministic(run):
    _, first = run("check", "ex2", "--chi", "1", "--seed", "7")
    _, second = run("check", "ex2", "--chi", "1", "--seed", "7")
    first.pop("elapsed")
    second.pop("elapsed")
    assert first == second


def test_run_report_json(run):
    _, data = run("check", "ex2", "--chi", "1 + h*u[0]")
    report = RunReport.from_json(json.dumps(data))
    assert report.to_dict() == data
    check = CheckReport.from_dict(report.results["check"])
    assert check.passed
    with pytest.raises(ValueError):
        RunReport.from_dict({**data, "schema_version": 2})


def _strict_json(text):
    def reject(constant):
        raise ValueError(f"non-finite constant {constant}")

    return json.loads(text, parse_constant=reject)


def test_exact_limit_report_is_strict_json(tmp_path):
    output = tmp_path / "limit.json"
    result = CliRunner().invoke(cli, ["limit", "--lambda", "u", "--chi", "1+h*u[0]", "-o", str(output)])
    assert result.exit_code == 0
    convergence = _strict_json(output.read_text(encoding="utf-8"))["results"]["convergence"]
    assert convergence["exact"]
    assert convergence["ratios"] == [None, None, None]


def test_run_report_rejects_non_finite_numbers():
    report = RunReport(__version__, "check", "ex2", {}, {"value": float("nan")}, False)
    with pytest.raises(ValueError):
        report.to_json()
