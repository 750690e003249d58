import pytest

_VERDICTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def verdict(request):
    """Record a one-line acceptance verdict; the test body still asserts."""
    name = request.node.name

    def record(passed: bool, detail: str):
        _VERDICTS[name] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_VERDICTS):
        passed, detail = _VERDICTS[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
