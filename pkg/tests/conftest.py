import numpy as np
import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion.

    Usage: ``acceptance(label, ok, detail)``; the call also asserts ``ok``.
    """

    def record(label, ok, detail=""):
        _ACCEPTANCE.append((label, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {label} {detail}")
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
    n_ok = sum(ok for _, ok, _ in _ACCEPTANCE)
    terminalreporter.write_line(f"{n_ok}/{len(_ACCEPTANCE)} criteria pass")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
