"""Acceptance suite: one test per criterion, each printing its pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the lines as they
complete, or `rhomix verify-all` for the same checks from the CLI.
"""
import pytest

from rhomix import acceptance

CHECKS = {fn.__name__: fn for fn in acceptance.ALL_CHECKS}


@pytest.mark.parametrize("name", list(CHECKS))
def test_criterion(name):
    result = CHECKS[name](threads=4)
    print(f"[{'PASS' if result.passed else 'FAIL'}] {result.name}: {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"
