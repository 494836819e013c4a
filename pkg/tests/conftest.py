from pathlib import Path

import numpy as np
import pytest

from curvesig.curves import Curve

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def fixture_curve(name: str) -> Curve:
    return Curve.load(FIXTURES / f"{name}.json")


@pytest.fixture
def circle():
    return fixture_curve("circle")


@pytest.fixture
def ellipse():
    return fixture_curve("ellipse")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# one PASS/FAIL line per acceptance criterion, printed after the run

_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        detail = dict(report.user_properties).get("detail", "")
        prev = _CRITERIA.get(name)
        if prev is None or prev[0] == "PASS":
            _CRITERIA[name] = ("PASS" if report.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("_")[2])):
        status, detail = _CRITERIA[name]
        terminalreporter.write_line(f"criterion {name.split('_')[2]}: {status}  {detail}".rstrip())
