import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def x22():
    return np.array([[1.0, 2.0], [3.0, 4.0]])


# one status line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        # passed=None marks a criterion that was not run
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        line = f"criterion {number}: {status}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
