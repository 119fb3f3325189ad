import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

import golden  # noqa: E402
from chainline import jsonl  # noqa: E402

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = _criteria_markers.get(report.nodeid)
    if marker is None:
        return
    n, title = marker
    detail = "; ".join(str(v) for k, v in report.user_properties if k == "measured")
    _criteria[n] = (title, report.outcome, detail)


_criteria_markers = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria_markers[item.nodeid] = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, outcome, detail = _criteria[n]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"criterion {n:2d}: {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def golden_chain():
    return golden.enriched_blocks()


@pytest.fixture
def golden_raw():
    return golden.raw_blocks()


@pytest.fixture
def chain_file(tmp_path):
    """Write blocks to a JSON-lines file and return its path."""

    def write(blocks, name="chain.jsonl"):
        path = tmp_path / name
        jsonl.write_lines(str(path), (jsonl.dumps(b) for b in blocks))
        return str(path)

    return write
