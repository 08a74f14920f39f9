import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    marker = item.get_closest_marker("criterion")
    t0 = time.perf_counter()
    yield
    if marker is not None:
        item.user_properties.append(("elapsed", time.perf_counter() - t0))


def pytest_runtest_logreport(report):
    if report.when not in ("setup", "call"):
        return
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    num, title = marker
    entry = _RESULTS.setdefault(num, {"title": title, "outcome": "passed", "detail": "", "elapsed": 0.0})
    props = dict(report.user_properties)
    entry["detail"] = props.get("detail", entry["detail"])
    entry["elapsed"] = props.get("elapsed", entry["elapsed"])
    if report.failed:
        entry["outcome"] = "failed"
    elif report.skipped:
        entry["outcome"] = "skipped"


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            item.user_properties.append(("criterion", tuple(marker.args)))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_RESULTS):
        r = _RESULTS[num]
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[r["outcome"]]
        tr.write_line(f"criterion {num:2d} {status}  {r['title']}  ({r['elapsed']:.1f} s)  {r['detail']}")
