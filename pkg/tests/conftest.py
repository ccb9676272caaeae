import os
from pathlib import Path

import pytest

from plancritique.blocksworld import BlocksState, builtin_domain, make_problem

GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("PLANCRITIQUE_REGEN_GOLDEN") == "1"


def golden(name: str, actual: str) -> None:
    """Compare with a frozen fixture. Set PLANCRITIQUE_REGEN_GOLDEN=1 to rewrite it."""
    path = GOLDEN / name
    if REGEN:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(actual, encoding="utf-8")
    assert path.exists(), f"missing golden file {path}"
    assert actual == path.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def bw():
    return builtin_domain()


def bw_problem(init_towers, goal_towers, name="p"):
    return make_problem(name, BlocksState(tuple(map(tuple, init_towers))), BlocksState(tuple(map(tuple, goal_towers))))


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
