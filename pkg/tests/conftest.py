import numpy as np
import pytest

from spinwire.model import ChainSpec

XY_HEADLINE = dict(gamma=0.5, gamma0=0.5, h=0.5, h_q=0.85)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def xy_spec(N, j):
    return ChainSpec(N=N, j=j, **XY_HEADLINE)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
