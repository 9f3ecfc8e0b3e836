import numpy as np
import pytest

from triformation.algebra import FormationSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=[(1.0, 1.0, 1.0), (3.0, 4.0, 5.0), (2.0, 2.5, 1.2)], ids=lambda d: ",".join(map(str, d)))
def spec(request):
    return FormationSpec(*request.param)


ACCEPTANCE_LINES = []


def report(number, passed, text):
    """Record and print one acceptance line."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
