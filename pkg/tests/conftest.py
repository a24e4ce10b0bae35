import os
from pathlib import Path

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def data_dir():
    d = os.environ.get("LIFTNET_DATA_DIR")
    return Path(d) if d else None


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if report.skipped and "test_acceptance" in report.nodeid and report.when in ("setup", "call"):
        reason = report.longrepr[-1] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        name = report.nodeid.split("::")[-1]
        ACCEPTANCE_LINES.append(f"[SKIP] {name}: {reason.removeprefix('Skipped: ')}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
