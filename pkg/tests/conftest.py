import numpy as np
import pytest

from nhfloquet.basis import BasisSpec
from nhfloquet.floquet import FloquetProblem
from nhfloquet.model import LaserField
from nhfloquet.resonance import solve_resonance

SMALL_SPEC = BasisSpec(box_length=120.0, n_box=120, n_channels=8, n_quad=360)
# production spatial resolution with a short channel window
FEW_CHANNELS = BasisSpec(n_channels=2)


@pytest.fixture(scope="session")
def small_problem():
    return FloquetProblem(spec=SMALL_SPEC)


@pytest.fixture(scope="session")
def small_resonance(small_problem):
    return solve_resonance(small_problem)


@pytest.fixture(scope="session")
def small_fieldless_resonance():
    return solve_resonance(FloquetProblem(spec=FEW_CHANNELS, laser=LaserField(epsilon0=0.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
