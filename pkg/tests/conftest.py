import numpy as np
import pytest

from stlverify.reach import LinearSystem
from stlverify.setops import Zonotope

_CRITERIA: dict = {}


def random_zonotope(rng, n, gens):
    return Zonotope(rng.normal(size=n), rng.normal(size=(n, gens)))


def random_stable_system(rng, n, m):
    """Random ``A`` shifted so that all eigenvalues have real part <= -0.1."""
    A = rng.normal(size=(n, n))
    shift = max(np.linalg.eigvals(A).real.max() + 0.1, 0.0)
    return LinearSystem(A - shift * np.eye(n), rng.normal(size=(n, m)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not report.failed:
        return
    number, title = mark.args
    prev = _CRITERIA.get(number)
    passed = report.passed and (prev is None or prev[1])
    _CRITERIA[number] = (title, passed, report.duration + (prev[2] if prev else 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, duration = _CRITERIA[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}: {title} ({duration:.1f} s)")
