import re

_ACCEPTANCE = "test_acceptance.py"
_outcomes: dict[int, list[bool]] = {}


def pytest_runtest_logreport(report):
    if _ACCEPTANCE not in report.nodeid:
        return
    m = re.search(r"::test_c(\d+)_", report.nodeid)
    if not m:
        return
    if report.when == "call" or report.failed:
        _outcomes.setdefault(int(m.group(1)), []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for num, title in CRITERIA.items():
        results = _outcomes.get(num)
        status = "NOT RUN" if not results else ("PASS" if all(results) else "FAIL")
        terminalreporter.write_line(f"criterion {num:>2} {title:<36} {status}")
