"""Acceptance criteria at their stated tolerances, one pass/fail line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines inline; they
are also attached to the test report.
"""
import pytest

from degres.acceptance import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n}")
def test_criterion(number, record_property):
    outcome = CRITERIA[number]()
    line = outcome.line()
    print(line)
    record_property("acceptance", line)
    assert outcome.passed, line
