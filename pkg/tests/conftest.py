import re

import pytest

from elastokss.grid import GridSpec

_RESULTS = {}
_LABEL = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow experiment; enable with --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_runtest_logreport(report):
    m = _LABEL.search(report.nodeid)
    if m is None:
        return
    key = (int(m.group(1)), m.group(2).replace("_", " "))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if report.skipped:
            _RESULTS[key] = "SKIP"
        else:
            _RESULTS[key] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), status in sorted(_RESULTS.items()):
        terminalreporter.write_line(f"criterion {num} ({name}): {status}")


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32, 8.0)


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(64, 8.0)
