import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, tuple[str, str, str]] = {}


class CriterionRecord:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.detail = ""


@pytest.fixture
def criterion(request):
    """Register an acceptance criterion; the outcome is reported at the end of the session."""
    rec = CriterionRecord(*request.node.get_closest_marker("criterion").args)
    request.node.user_properties.append(("criterion", rec))
    return rec


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    for key, rec in report.user_properties:
        if key != "criterion":
            continue
        if report.when == "call" or report.failed:
            status = "PASS" if report.passed else "FAIL"
            prev = _criteria.get(rec.number)
            if prev is None or prev[1] == "PASS":
                _criteria[rec.number] = (rec.title, status, rec.detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, detail = _criteria[number]
        line = f"criterion {number} {status}: {title}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
