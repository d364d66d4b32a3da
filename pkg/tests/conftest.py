"""Shared pytest plumbing for the acceptance suite.

Acceptance tests record their outcome through `record_criterion`; the
terminal-summary hook prints one ``CRITERION n PASS/FAIL`` line per
executed criterion after the run, outside of output capture.
"""

_criteria = {}


def record_criterion(n, ok):
    _criteria[n] = ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(
            "CRITERION %d %s" % (n, "PASS" if _criteria[n] else "FAIL")
        )
