import pytest

verdicts_key = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[verdicts_key] = {}


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(verdicts_key, {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(n: int, passed: bool, detail: str) -> bool:
        line = f"criterion {n:2d} {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.stash[verdicts_key][n] = line
        print(line)
        return passed

    return record
