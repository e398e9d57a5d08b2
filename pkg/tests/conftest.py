import pytest

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running statistical test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "seen": False, "detail": []})
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry["seen"] = True
        if rep.outcome != "passed":
            entry["ok"] = False
    if rep.when == "call":
        for name, content in rep.user_properties:
            if name == "detail":
                entry["detail"].append(content)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] and e["seen"] else "FAIL"
        tr.write_line(f"criterion {number}: {status}  {e['title']}")
        for d in e["detail"]:
            tr.write_line(f"    {d}")
