import os

import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None, print_blob=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

_CRITERIA: dict[str, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = marker.args
    entry = _CRITERIA.setdefault(cid, {"title": title, "ok": True, "seen": False, "detail": []})
    if report.when == "call" or (report.when == "setup" and report.failed):
        entry["seen"] = True
        entry["ok"] = entry["ok"] and report.passed
        entry["detail"] += [str(v) for k, v in report.user_properties if k == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c[1:])):
        e = _CRITERIA[cid]
        status = "PASS" if e["ok"] and e["seen"] else "FAIL"
        detail = "; ".join(e["detail"])
        terminalreporter.write_line(f"{status} {cid} {e['title']}" + (f" | {detail}" if detail else ""))
