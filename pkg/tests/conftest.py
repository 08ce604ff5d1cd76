import numpy as np
import pytest

from artifact import plmap, sectors, shrink
from artifact.symbolic import RotationalParams

GUESSES = {(3, 3, 8): (-1.36, 0.14), (2, 2, 5): (-2.0, 0.2)}


@pytest.fixture(scope="session")
def fig_slice():
    return plmap.get_slice("bcnf3-fig1")


@pytest.fixture(scope="session")
def point_338(fig_slice):
    return shrink.locate(fig_slice, RotationalParams(3, 3, 8), GUESSES[(3, 3, 8)])


@pytest.fixture(scope="session")
def point_225(fig_slice):
    return shrink.locate(fig_slice, RotationalParams(2, 2, 5), GUESSES[(2, 2, 5)])


@pytest.fixture(scope="session")
def polar_338(point_338):
    return sectors.PolarFrame(point_338)


@pytest.fixture(scope="session")
def polar_225(point_225):
    return sectors.PolarFrame(point_225)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one acceptance line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def emit(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
