"""Shared pytest hooks: one-line summary per acceptance criterion."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")

_results = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None:
        return
    num, label = int(m.group(1)), m.group(2)
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _results[num] = (label, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_line("")
    for num in sorted(_results):
        label, outcome = _results[num]
        word = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(
            f"[acceptance] criterion {num:02d} {word} - {label.replace('_', ' ')}"
        )
