"""Shared fixtures: frozen goldens and session-cached assembled forms."""

import json
from pathlib import Path

import pytest

from fracsobolev.gagliardo import assemble
from fracsobolev.mesh import build_mesh
from fracsobolev.solver import solve

GOLDENS_PATH = Path(__file__).parent / "goldens.json"

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    """Shared list the acceptance tests append their verdict lines to."""
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def goldens():
    return json.loads(GOLDENS_PATH.read_text())


@pytest.fixture(scope="session")
def forms_1d_s025():
    """Assembled forms for dim 1, s = 0.25, levels 4..8 (built once)."""
    return {lev: assemble(build_mesh(1, lev), 0.25) for lev in range(4, 9)}


@pytest.fixture(scope="session")
def reports_1d_s025(forms_1d_s025):
    """Solver reports for the shared forms (solved once)."""
    return {lev: solve(form) for lev, form in forms_1d_s025.items()}
