import numpy as np
import pytest

from wavetunnel.state import Grid, SquareBarrier, gaussian_packet, sample_potential

# one line per acceptance criterion, printed in the terminal summary
_ACCEPTANCE_LINES = {}


def record_acceptance(number, title, passed, detail=""):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
    if detail:
        line += f"  [{detail}]"
    _ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[number])


@pytest.fixture
def small_grid():
    return Grid(1024)


@pytest.fixture
def small_setup(small_grid):
    """Packet at 400 heading to a 12-site barrier at 560 on a 1024-site grid."""
    psi0 = gaussian_packet(small_grid, 400.0, 8.0, 0.6)
    barrier = SquareBarrier(560, 12, 1.5)
    V = sample_potential(barrier, small_grid, 0.6)
    return psi0, barrier, V


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
