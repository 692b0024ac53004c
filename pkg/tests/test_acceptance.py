"""Acceptance gate: every shipped claim, one test per criterion.

Run with -v to get one PASS/FAIL line per criterion; the printed detail
carries the measured number against its tolerance.  These execute the full
(non-quick) settings, so this module is the slow part of the suite.
"""

import pytest

from coneflow.acceptance import CRITERIA, run_acceptance

IDS = [f"{number:02d}-{name}" for number, name, _ in CRITERIA]


@pytest.mark.parametrize("number,name,fn", CRITERIA, ids=IDS)
def test_criterion(number, name, fn):
    ok, detail = fn(quick=False)
    line = f"[{number:2d}/14] {'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    assert ok, line


def test_run_acceptance_aggregates(capsys):
    report = run_acceptance(quick=True, numbers={3, 4})
    out = capsys.readouterr().out
    assert len(report.results) == 2
    assert report.passed
    assert "[ 3/14] PASS profile-monotonicity" in out
    assert "[ 4/14] PASS sup-decay-rate" in out
    assert "acceptance PASS: 2/2" in out
