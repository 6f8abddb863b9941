import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_REPORT = []


@pytest.fixture
def report():
    """Collects one PASS/FAIL line per acceptance criterion."""
    def add(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
        _REPORT.append(line)
        print(line)
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
