from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from narrarl.env import GridWorld, Position, generate_grid  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def fixture_grid() -> GridWorld:
    return generate_grid(7, 0.30, 42)


@pytest.fixture
def empty5() -> GridWorld:
    return GridWorld(5, frozenset(), Position(0, 0), Position(4, 4), 0, 0.0)


@pytest.fixture
def trace_fixture() -> Path:
    return FIXTURES / "trace_3ep.jsonl"


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: numbered acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
