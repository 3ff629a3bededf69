import time

import pytest

from pscurv.config import preset
from pscurv.pipeline import run_scenario

_RUNS = {}
ACCEPTANCE_LINES = []


def scenario_run(name):
    """Run a preset once per session; returns ``(result, seconds)``."""
    if name not in _RUNS:
        start = time.perf_counter()
        result = run_scenario(preset(name))
        _RUNS[name] = (result, time.perf_counter() - start)
    return _RUNS[name]


@pytest.fixture(scope="session")
def runs():
    return scenario_run


@pytest.fixture(scope="session")
def report_line():
    def emit(number, title, ok, detail):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
