import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# Acceptance criteria register their PASS/FAIL lines here; the summary hook
# prints them after the run, outside pytest's capture.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
