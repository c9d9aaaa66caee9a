import pytest

from levyavg.validation import CRITERIA, CriterionResult, run_criteria


def test_result_line_format():
    r = CriterionResult(3, "weak rate", True, {"slope": 1.01234, "ci": [0.9, 1.1], "points_used": 5})
    assert r.line() == "[PASS] criterion 3: weak rate :: slope=1.012, ci=[0.9, 1.1], points_used=5"
    assert CriterionResult(1, "x", False).line().startswith("[FAIL] criterion 1")


def test_every_criterion_registered():
    assert sorted(CRITERIA) == list(range(1, 11))


@pytest.mark.parametrize("number", [4, 8, 9])
def test_quick_criteria_pass(number):
    lines = []
    res = run_criteria([number], quick=True, report=lines.append)
    assert res[0].passed, lines[0]
    assert lines[0].startswith("[PASS]")
