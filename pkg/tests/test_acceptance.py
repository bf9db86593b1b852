"""Acceptance criteria 1-8 at their stated tolerances.

Each test prints one pass/fail line; set PERTURBEX_TOL to tighten or loosen.
"""

import pytest

from perturbex.acceptance import CRITERIA, run_criterion, tolerances


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    res = run_criterion(k, tolerances())
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.error or res.details
