import dataclasses
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tripweaver.domain import STAGES  # noqa: E402
from tripweaver.scenario import bundled_scenario_path, config_from_dict, load_scenario  # noqa: E402


@pytest.fixture(scope="session")
def bundled_raw() -> dict:
    return json.loads(bundled_scenario_path().read_text())


@pytest.fixture(scope="session")
def bundled_config():
    return load_scenario(bundled_scenario_path())


@pytest.fixture(scope="session")
def network(bundled_config):
    return bundled_config.network


@pytest.fixture
def raw_copy(bundled_raw):
    return json.loads(json.dumps(bundled_raw))


def small_config(config, days: int = 3, agents: int = 3, **changes):
    return dataclasses.replace(config, days=days, agents=config.agents[:agents], **changes)


def all_stages(core: str) -> dict:
    return {s: core for s in STAGES}


@pytest.fixture
def make_config(bundled_raw):
    def make(**overrides):
        raw = json.loads(json.dumps(bundled_raw))
        raw.update(overrides)
        return config_from_dict(raw)
    return make


@pytest.fixture(scope="session")
def oracle_run(bundled_config, tmp_path_factory):
    """One full oracle run of the bundled scenario, shared by read-only tests."""
    from tripweaver.runner import run_simulation

    return run_simulation(bundled_config, tmp_path_factory.mktemp("oracle"))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
