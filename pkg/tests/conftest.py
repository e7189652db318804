import warnings

import pytest

from fibising.spectrum import RefinementWarning

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True)
def _quiet_refinement():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RefinementWarning)
        yield


@pytest.fixture
def acceptance_report():
    """Record (and print) one PASS/FAIL line per acceptance criterion."""

    def report(number: int, title: str, passed: bool, detail: str = ""):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
