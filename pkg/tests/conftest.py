import math

import numpy as np
import pytest

from crtkit.field import GridSpec, ScalarField

ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Collects one summary line per acceptance criterion."""
    def _record(line: str):
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def field_from(grid: GridSpec, fun) -> ScalarField:
    coords = grid.mesh()
    return ScalarField(grid, np.broadcast_to(fun(*coords), grid.shape))


@pytest.fixture
def grid2d():
    return GridSpec.from_bounds((-1.0, 0.0), (1.0, 2.0), (33, 41))


QUARTER = math.pi / 4
