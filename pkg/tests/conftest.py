import pytest


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False, help="run long-running checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, passed, detail, seconds, limit)."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number, passed, detail, seconds=None, limit=None):
        timing = ""
        if seconds is not None:
            timing = f" [{seconds:.1f}s" + (f" / limit {limit:.0f}s]" if limit is not None else "]")
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}{timing}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":").split("/")[0])):
            terminalreporter.write_line(line)
