import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(acceptance_log.LINES.items()):
            terminalreporter.write_line(line)
