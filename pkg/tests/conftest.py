import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one PASS/FAIL line per acceptance criterion at the end of the run
_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.failed:
        props = dict(report.user_properties)
        key = props.get("criterion")
        if key is not None:
            status = "PASS" if report.passed else "FAIL"
            if report.passed and props.get("informational"):
                status = "INFO"
            _acceptance[key] = (status, props.get("summary", ""))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_acceptance):
        status, summary = _acceptance[key]
        terminalreporter.write_line(f"criterion {key:2d}: {status}  {summary}")
