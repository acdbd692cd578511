import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from rwhdp.graph import Graph  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "status": "PASS", "tests": 0})
    if rep.when == "call" or rep.outcome != "passed":
        if rep.when == "call":
            entry["tests"] += 1
        if rep.skipped and entry["status"] == "PASS":
            entry["status"] = "SKIP"
        elif rep.failed:
            entry["status"] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        terminalreporter.write_line(
            f"criterion {number}: {entry['status']}  {entry['title']}")


@pytest.fixture
def barbell():
    """Two triangles {0,1,2} and {3,4,5} joined by the bridge 2-3."""
    edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0),
             (2, 3, 1.0)]
    return Graph.from_edges(6, edges)


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])
