import re

import numpy as np
import pytest

from noisy_rgbd.fixture import write_fixture

_CRITERIA = {}


@pytest.fixture(scope="session")
def fixture_seq(tmp_path_factory):
    """The 16-frame synthetic sequence, written once per session (read-only)."""
    root = tmp_path_factory.mktemp("fixture") / "clean"
    write_fixture(root)
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.failed:
        _CRITERIA[n] = (m.group(2).replace("_", " "), "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        name, status = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {name}")
