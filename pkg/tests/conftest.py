import re
from collections import defaultdict

CRITERIA = {
    1: "tracking conservation",
    2: "tracking disagreement bound",
    3: "prox-map Lipschitz",
    4: "single-agent reduction",
    5: "objective-error bound (primal)",
    6: "dual, penalty and primal bounds",
    7: "charging scenario reproduction",
    8: "Danskin finite differences",
    9: "oracle cross-check",
    10: "determinism",
}
_NAME = re.compile(r"test_criterion_(\d+)_")
_outcomes: dict[int, list[str]] = defaultdict(list)


def pytest_runtest_logreport(report):
    m = _NAME.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes[int(m.group(1))].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        if k not in _outcomes:
            continue
        ok = all(o == "passed" for o in _outcomes[k])
        terminalreporter.write_line(f"criterion {k:2d} ({CRITERIA[k]}): {'PASS' if ok else 'FAIL'}")
