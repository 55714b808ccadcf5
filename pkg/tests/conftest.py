import sys

import pytest


@pytest.fixture(scope="session")
def zero_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("zeros")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
