import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from subred.surface import parse_program  # noqa: E402

FIXTURES = HERE / "fixtures"


def load(name: str):
    return parse_program((FIXTURES / name).read_text())


@pytest.fixture(scope="session")
def lists():
    return load("lists.sub")


@pytest.fixture(scope="session")
def factsqrt():
    return load("factsqrt.sub")


@pytest.fixture(scope="session")
def append():
    return load("append.sub")


# one "criterion N: PASS|FAIL ..." line per acceptance criterion, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
