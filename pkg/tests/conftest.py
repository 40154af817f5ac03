import numpy as np
import pytest

from fluxsat.core import Grid, ModelSpec, Profile


@pytest.fixture
def rhe():
    return ModelSpec.rhe()


@pytest.fixture
def block_profile():
    g = Grid.on_interval(-0.5, 1.5, 0.01)
    return Profile.from_function(g, lambda x: np.where((x >= 0) & (x <= 1), 1.0, 0.0))


# PASS/FAIL lines recorded by the acceptance suite, repeated after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
