import re

import numpy as np
import pytest

from cvfrac.cvgeom import build_control_volumes
from cvfrac.mesh import Rectangle, generate_rect_mesh

UNIT_SQUARE = Rectangle(0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def grid22():
    return generate_rect_mesh(2, 2, UNIT_SQUARE)


@pytest.fixture(scope="session")
def grid44():
    return generate_rect_mesh(4, 4, UNIT_SQUARE)


@pytest.fixture(scope="session")
def grid44_cv(grid44):
    return build_control_volumes(grid44)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::test_c(\d+)", report.nodeid)
    if not match:
        return
    num = int(match.group(1))
    if report.when == "call":
        _ACCEPTANCE[num] = (report.nodeid, report.outcome)
    elif report.when == "setup" and report.outcome != "passed":
        _ACCEPTANCE[num] = (report.nodeid, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        nodeid, outcome = _ACCEPTANCE[num]
        name = nodeid.split("::", 1)[1]
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"criterion {num:2d} [{status}] {name}")
