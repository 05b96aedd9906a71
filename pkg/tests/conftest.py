import os
from pathlib import Path

import pytest
import yaml
from hypothesis import HealthCheck, settings

import decwf

settings.register_profile("ci", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, "text")`` then assert."""

    def record(number, text):
        _CRITERIA[number] = [text, request.node.nodeid]

    return record


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for entry in _CRITERIA.values():
        if entry[1] == report.nodeid and len(entry) == 2:
            entry.append("PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = entry[2] if len(entry) > 2 else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {entry[0]}")


SCENARIO_DIR = Path(decwf.__file__).parent / "scenarios"


def load_process(name):
    from decwf.workflow import ProcessDefinition

    return ProcessDefinition.from_doc(yaml.safe_load((SCENARIO_DIR / f"{name}-process.yaml").read_text()))


@pytest.fixture(scope="session")
def wcp1():
    return load_process("wcp1")


@pytest.fixture(scope="session")
def wcp15():
    return load_process("wcp15")


@pytest.fixture(scope="session")
def wcp17():
    return load_process("wcp17")
