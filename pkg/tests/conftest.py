"""Prints the release-gate verdicts in the terminal summary.

The gate tests record (name, ok) pairs as they finish; emitting them here,
through the terminal reporter, keeps one visible line per check no matter
what capture mode the run uses.
"""
import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = (sys.modules.get("test_acceptance")
           or sys.modules.get("tests.test_acceptance"))
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("release gate")
    for name, ok in verdicts:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}")
