import re

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_results = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None:
        return
    n = int(m.group(1))
    if report.when == "call" or report.failed:
        ok = _results.get(n, True) and not report.failed
        _results[n] = ok


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _results[n] else 'FAIL'}")
