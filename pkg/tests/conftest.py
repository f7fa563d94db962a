import numpy as np
import pytest

from ae2lstm.synthetic import generate_synthetic_cohort


@pytest.fixture(scope="session")
def tiny_cohort():
    return generate_synthetic_cohort(8, (16, 16, 4), seed=3)


@pytest.fixture
def rng_np():
    # test-side randomness only; never used by the code under test
    return np.random.default_rng(12345)


# acceptance criteria: tests tagged @pytest.mark.criterion(n, title) are
# aggregated into one PASS/FAIL line per criterion in the terminal summary
_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "ok": True, "tests": 0, "seconds": 0.0})
    if report.when == "call":
        entry["tests"] += 1
        entry["seconds"] += report.duration
    if report.failed or (report.skipped and report.when == "call"):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {n} [{status}] {e['title']} "
                                    f"({e['tests']} checks, {e['seconds']:.1f}s)")
