from __future__ import annotations

import pathlib
import re

import pytest

from bncg.game import make_scheme, parse_game

DATA = pathlib.Path(__file__).parent / "data"

A, B = ("A",), ("B",)


@pytest.fixture
def two_links():
    return parse_game((DATA / "two_links.json").read_text())


@pytest.fixture
def split_scheme():
    """The hand-built scheme: all on B in theta0, one random player on B in theta1."""
    third = 1.0 / 3.0
    return make_scheme({
        "theta0": [(1.0, (B, B, B))],
        "theta1": [(third, (A, A, B)), (third, (A, B, A)), (third, (B, A, A))],
    })


# one PASS/FAIL line per acceptance criterion at the end of the run
_criteria: dict[int, str] = {}
_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_")


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    n = int(m.group(1))
    if not _criteria.get(n, "PASS").startswith("FAIL"):
        if report.passed:
            _criteria[n] = "PASS"
        elif getattr(report, "wasxfail", None) is not None:
            _criteria[n] = "FAIL (known failure, marked xfail: see the test's reason)"
        else:
            _criteria[n] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(f"criterion {n}: {_criteria[n]}")
