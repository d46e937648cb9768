import os

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_collection_modifyitems(config, items):
    if os.environ.get("DELTAARC_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow; set DELTAARC_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record one acceptance line and return the pass flag."""

    def _report(name, ok, detail):
        ok = bool(ok)
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report
