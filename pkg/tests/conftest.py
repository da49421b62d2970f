import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from carterlab.metric import CarterParams, SlabSpec, build_coefficients  # noqa: E402
from carterlab.slab_spectral import assemble_operators, build_slab  # noqa: E402

KERR_SLAB = SlabSpec(3.0, 5.0, -0.5, 0.5)


@pytest.fixture(scope="session")
def kerr():
    return build_coefficients(CarterParams(M=1, a=0.5))


@pytest.fixture(scope="session")
def kerr_ops(kerr):
    """Kerr a = 1/2 slab at 17 x 17 nodes, m = 0."""
    return assemble_operators(build_slab(kerr, KERR_SLAB, 17))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.addinivalue_line("markers", "slow: long-running (full symbolic certificate, fine grids)")


# acceptance reporting: tests marked criterion(n, title) are aggregated into one line per criterion
_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "tests": 0})
    entry["tests"] += rep.when == "call"
    entry["passed"] &= rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {e['title']} ({e['tests']} tests)")
