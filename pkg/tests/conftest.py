import pytest

from uflsalloc import datasets
from uflsalloc.model import RiskSpec, build_problem

_criteria = {}
_details = {}


@pytest.fixture(scope="session")
def table1():
    return datasets.load_table1()


@pytest.fixture(scope="session")
def table1_gaussian(table1):
    return build_problem(table1, "diagonal", 250.0, RiskSpec.gaussian(0.01))


@pytest.fixture
def record(request):
    """Attach a measured value to the criterion's summary line."""
    marker = request.node.get_closest_marker("criterion")

    def _record(text):
        _details.setdefault(marker.args[0], []).append(text)
    return _record


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when == "teardown":
        return
    if call.when == "setup" and call.excinfo is None:
        return
    n = marker.args[0]
    _criteria[n] = _criteria.get(n, True) and call.excinfo is None


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        extra = "; ".join(_details.get(n, []))
        line = f"criterion {n:2d}: {'PASS' if _criteria[n] else 'FAIL'}"
        terminalreporter.write_line(f"{line}  {extra}" if extra else line)
