"""Acceptance criteria at their stated tolerances and time budgets.

Each test prints one ``id=N pass=...`` line, visible in the pytest log.
"""

import pytest

from halfspace_boussinesq.harness.acceptance import CRITERIA, format_line

SLOW = {6, 7, 8}


@pytest.mark.parametrize(
    "cid",
    [pytest.param(c, marks=pytest.mark.slow) if c in SLOW else c for c in sorted(CRITERIA)],
)
def test_criterion(cid, capsys):
    result = CRITERIA[cid]()
    line = format_line(result)
    with capsys.disabled():
        print(f"\n{line}")
    assert result.passed, line
    assert result.within_budget, line
