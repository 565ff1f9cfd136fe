from pathlib import Path

import pytest

from pokegauntlet.gamedata import load_game_data

REPO_ROOT = Path(__file__).resolve().parent.parent

# One line per acceptance criterion, printed after the test summary so
# the pass/fail verdicts survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def data():
    return load_game_data(REPO_ROOT)


@pytest.fixture(scope="session")
def rules(data):
    return data.ruleset
