import pytest

_KEY = "_acceptance_lines"


def pytest_configure(config):
    setattr(config, _KEY, [])


@pytest.fixture
def acceptance_log(request):
    """Call ``log(number, passed, detail)`` once per criterion."""
    lines = getattr(request.config, _KEY)

    def log(number, passed, detail=""):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, _KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
