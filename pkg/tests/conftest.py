import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion.

    Lines are echoed immediately (visible with ``-s``) and repeated in the
    terminal summary so they survive output capturing.
    """
    def _report(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _LINES.append(line)
        print(line)
        return ok
    return _report


@pytest.fixture
def note():
    """Record an informational line that carries no pass/fail verdict."""
    def _note(label, detail):
        line = f"[INFO] {label}: {detail}"
        _LINES.append(line)
        print(line)
    return _note


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
