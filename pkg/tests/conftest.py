import time
from contextlib import contextmanager

import pytest

_ACCEPTANCE_LINES: list[str] = []


@contextmanager
def _criterion(label: str, budget_s: float | None):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget_s is not None:
            assert elapsed < budget_s, f"{label}: took {elapsed:.1f}s, budget {budget_s}s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        _ACCEPTANCE_LINES.append(f"FAIL  {label}  ({elapsed:.2f}s) {type(exc).__name__}: {exc}".splitlines()[0])
        raise
    _ACCEPTANCE_LINES.append(f"PASS  {label}  ({elapsed:.2f}s)")


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
