import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

KINDS = ["magic-square", "costas", "all-interval"]


@pytest.fixture(params=KINDS)
def kind(request):
    return request.param


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical checks")
    config.addinivalue_line("markers", "acceptance: one test per acceptance criterion")


def pytest_sessionstart(session):
    from test_acceptance import REPORT_FILE
    if REPORT_FILE.exists():
        REPORT_FILE.unlink()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
