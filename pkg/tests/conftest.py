import sys
from pathlib import Path

import pytest

from saasbroker import datasets
from saasbroker.sla import to_requirement

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS / "oracles"))

# criterion number -> [title, [outcomes]]
_CRITERIA: dict[int, list] = {}
# criterion number -> reported (not asserted) figures
_NOTES: dict[int, list[str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            _CRITERIA.setdefault(n, [title, []])


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = getattr(report, "criterion", None)
    if n is not None:
        _CRITERIA[n][1].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[n]
        if not outcomes:
            verdict = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            verdict = "PASS"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}  {title} ({len(outcomes)} checks)")
        for text in _NOTES.get(n, []):
            terminalreporter.write_line(f"    {text}")


@pytest.fixture
def note(request):
    """Attach a reported figure to the test's criterion in the summary."""
    n = request.node.get_closest_marker("criterion").args[0]
    return lambda text: _NOTES.setdefault(n, []).append(text)


@pytest.fixture(scope="session")
def case_offers():
    return datasets.case_study_offers()


@pytest.fixture(scope="session")
def case_request():
    return datasets.case_study_request()


@pytest.fixture(scope="session")
def case_inputs(case_request):
    return to_requirement(case_request)
