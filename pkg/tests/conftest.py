import re

_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    name, outcome, dur = _CRITERIA.get(key, (m.group(2).replace("_", " "), "passed", 0.0))
    if report.when in ("setup", "call"):
        dur += report.duration
    if report.outcome != "passed" and report.when != "teardown":
        outcome = report.outcome
    _CRITERIA[key] = (name, outcome, dur)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        name, outcome, dur = _CRITERIA[key]
        flag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {key:>2}: {flag}  {name} ({dur:.1f} s)")
