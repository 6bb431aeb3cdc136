"""Shared solves.  Converged states are expensive, so each is built once per session."""

import pytest

from gravvortex.config import SolverConfig
from gravvortex.coupled import initial_state, solve_at_alpha
from gravvortex.divisor import antipodal, equatorial

# named test cases: (divisor, tau)
TPS = (antipodal((1, 1)), 6.0)
TS = (equatorial(3), 8.0)


@pytest.fixture(scope="session")
def cfg64():
    return SolverConfig(L=64)


@pytest.fixture(scope="session")
def cfg32():
    return SolverConfig(L=32)


@pytest.fixture(scope="session")
def tps0(cfg64):
    return initial_state(*TPS, cfg64)


@pytest.fixture(scope="session")
def ts0(cfg64):
    return initial_state(*TS, cfg64)


@pytest.fixture(scope="session")
def tps24(tps0, cfg64):
    """T-PS at alpha = 1/24 (c = 1)."""
    return solve_at_alpha(tps0, 1.0 / 24.0, cfg64)


@pytest.fixture(scope="session")
def ts48(ts0, cfg64):
    """T-S at alpha = 1/48 (c = 1)."""
    return solve_at_alpha(ts0, 1.0 / 48.0, cfg64)


# acceptance verdicts, echoed in the terminal summary
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
