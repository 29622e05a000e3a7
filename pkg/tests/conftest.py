import time
from contextlib import contextmanager

import pytest

ACCEPTANCE_LOG: list[str] = []


@contextmanager
def _criterion(number: int, title: str, budget: float):
    """Time the block, then fail it if it overran ``budget`` seconds; log one line either way."""
    start = time.perf_counter()
    notes: list[str] = []
    try:
        yield notes
        elapsed = time.perf_counter() - start
        if elapsed > budget:
            raise AssertionError(f"runtime {elapsed:.2f}s exceeds the {budget:g}s budget")
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        notes.append(reason)
        ACCEPTANCE_LOG.append(_line(number, "FAIL", title, elapsed, budget, notes))
        raise
    ACCEPTANCE_LOG.append(_line(number, "PASS", title, elapsed, budget, notes))


def _line(number, verdict, title, elapsed, budget, notes):
    extra = f"  [{'; '.join(notes)}]" if notes else ""
    return f"criterion {number:>2} {verdict}  {title}  ({elapsed:.2f}s / {budget:g}s){extra}"


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LOG, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
