import pytest

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    verdicts = request.config.stash[_VERDICTS]

    def record(number, ok, detail):
        verdicts[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'} {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash[_VERDICTS]
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
