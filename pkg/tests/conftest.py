"""Shared test plumbing: a registry of acceptance-criterion outcomes that is
printed, one line per criterion, at the end of the run."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (str(k[0]), k[1])):
        terminalreporter.write_line(ACCEPTANCE[key])
