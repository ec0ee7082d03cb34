import os

import pytest


def pytest_addoption(parser):
    parser.addoption("--skip-long", action="store_true",
                     help="skip tests marked long (minutes to hours)")


def pytest_collection_modifyitems(config, items):
    if not (config.getoption("--skip-long") or os.environ.get("FLASHREAD_SKIP_LONG")):
        return
    skip = pytest.mark.skip(reason="long test skipped on request")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.acceptance_lines
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
