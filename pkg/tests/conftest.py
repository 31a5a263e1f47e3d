"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

from collections import OrderedDict

import pytest

_outcomes = OrderedDict()


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    if call.when == "setup" and call.excinfo is None:
        return
    number, title = marker.args
    entry = _outcomes.setdefault(number, {"title": title, "tests": 0, "failed": []})
    if call.when == "call":
        entry["tests"] += 1
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_outcomes):
        entry = _outcomes[number]
        status = "FAIL" if entry["failed"] else "PASS"
        line = f"criterion {number:>2}: {status}  {entry['title']} ({entry['tests']} tests"
        if entry["failed"]:
            line += f", failed: {', '.join(entry['failed'])}"
        tr.write_line(line + ")")
