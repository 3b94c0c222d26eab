import pytest

_LINES = "acceptance_lines"


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the end-of-session acceptance summary."""
    lines = request.config.__dict__.setdefault(_LINES, [])

    def _record(line: str) -> None:
        print(line)
        lines.append(line)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get(_LINES)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
