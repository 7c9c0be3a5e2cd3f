import json

import pytest
from click.testing import CliRunner

from tripweaver.cli import main
from tripweaver.scenario import bundled_scenario_path


@pytest.fixture
def cli():
    return CliRunner()


@pytest.fixture
def scenario():
    return str(bundled_scenario_path())


def test_validate_ok(cli, scenario):
    res = cli.invoke(main, ["validate", "--config", scenario])
    assert res.exit_code == 0
    assert res.output.startswith("ok: 4 zones, 8 links, 10 households, 21 days")


def test_validate_missing_file(cli, tmp_path):
    res = cli.invoke(main, ["validate", "--config", str(tmp_path / "nope.json")])
    assert res.exit_code == 2


def test_validate_bad_scenario(cli, tmp_path, raw_copy):
    raw_copy["links"][0]["to"] = 9
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw_copy))
    res = cli.invoke(main, ["validate", "--config", str(path)])
    assert res.exit_code == 1
    assert "links[0].to" in res.output


def test_run_and_report(cli, scenario, tmp_path):
    res = cli.invoke(main, ["run", "--config", scenario, "--out", str(tmp_path), "--days", "2", "--seed", "3"])
    assert res.exit_code == 0, res.output
    assert "missing rate 0.0%" in res.output
    run_dir = res.output.strip().splitlines()[-1]
    assert json.loads((tmp_path / run_dir.split("/")[-1] / "config.json").read_text())["seed"] == 3
    rep = cli.invoke(main, ["report", run_dir])
    assert rep.exit_code == 0
    assert rep.output.startswith("# Run report")


def test_run_rejects_zero_days(cli, scenario, tmp_path):
    res = cli.invoke(main, ["run", "--config", scenario, "--out", str(tmp_path), "--days", "0"])
    assert res.exit_code == 1


def test_llm_core_without_endpoint(cli, scenario, tmp_path):
    res = cli.invoke(main, ["run", "--config", scenario, "--out", str(tmp_path), "--core", "llm", "--days", "1"],
                     env={"LLM_BASE_URL": ""})
    assert res.exit_code == 1
    assert "LLM_BASE_URL" in res.output
    assert list(tmp_path.iterdir()) == []


def test_report_on_non_run_dir(cli, tmp_path):
    res = cli.invoke(main, ["report", str(tmp_path)])
    assert res.exit_code == 2
