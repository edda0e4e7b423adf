import numpy as np
import pytest

from cellsil.nonlinearity import BvpPhi, ToyPhi
from cellsil.potential import PotentialWell, solve_standing_wave


@pytest.fixture(scope="session")
def ac_profile():
    return solve_standing_wave(PotentialWell.allen_cahn(), 20.0, 2000)


@pytest.fixture(scope="session")
def asym_profile():
    return solve_standing_wave(PotentialWell.asymmetric(150), 20.0, 2000)


@pytest.fixture(scope="session")
def coarse_ac_profile():
    return solve_standing_wave(PotentialWell.allen_cahn(), 20.0, 400)


@pytest.fixture(scope="session")
def toy100():
    return ToyPhi(100.0)


@pytest.fixture(scope="session")
def ac_phi100(ac_profile):
    return BvpPhi(ac_profile, 100.0)


@pytest.fixture(scope="session")
def asym_phi100(asym_profile):
    return BvpPhi(asym_profile, 100.0)


class ConstantPhi:
    """Phi identically equal to ``c``; a stand-in with the PhiFunction call interface."""

    beta = 0.0

    def __init__(self, c=0.0):
        self.c = c

    def __call__(self, V):
        return np.zeros_like(np.asarray(V, dtype=float)) + self.c

    def prime(self, V):
        return np.zeros_like(np.asarray(V, dtype=float))

    def sup_norm(self):
        return abs(self.c)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
