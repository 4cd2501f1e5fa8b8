import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion verdicts after the run."""
    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
