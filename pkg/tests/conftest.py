"""Shared test settings and the per-criterion acceptance summary."""

from collections import defaultdict

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_outcomes = defaultdict(list)
_titles = {}
_measured = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _titles[mark.args[0]] = mark.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[n].append(report.outcome == "passed")
        if report.when == "call":
            for name, value in item.user_properties:
                _measured[n].append(f"{name}={value}")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        verdict = "PASS" if all(_outcomes[n]) else "FAIL"
        detail = "; ".join(_measured[n])
        terminalreporter.write_line(f"criterion {n:>2} {verdict}  {_titles[n]}" + (f"  [{detail}]" if detail else ""))
