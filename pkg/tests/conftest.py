import numpy as np
import pytest
from hypothesis import settings

from frontchannel.grid import Grid2D

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=["front", "periodic"])
def small_grid(request):
    return Grid2D(4.0, 1.0, 24, 12, request.param)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
CRITERIA = {}


@pytest.fixture
def criterion():
    def record(number, title, checks):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{text} [{'ok' if passed else 'FAIL'}]" for text, passed in checks)
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])
