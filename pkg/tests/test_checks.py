import pytest

from randorder import checks, online_gap
from randorder.model import validate_gap


@pytest.mark.parametrize("name", checks.SUITES)
def test_suites_pass_small(name):
    res = checks.run_suite(name, 40, seed=3)
    assert res.passed, res.failures[:1]
    assert res.checked > 0


def test_corpora_are_deterministic():
    assert checks.gap_corpus(25, 4) == checks.gap_corpus(25, 4)
    assert checks.knapsack_corpus(25, 4) == checks.knapsack_corpus(25, 4)
    assert checks.gap_corpus(25, 4) != checks.gap_corpus(25, 5)


def test_mutated_infeasible_run_is_caught(monkeypatch):
    # testing the load after adding turns the infeasible run into the feasible one
    monkeypatch.setattr(online_gap, "run_infeasible_gap", online_gap.run_feasible_gap)
    res = checks.coupling_suite(500, seed=1)
    assert not res.passed
    assert any("overflow" in str(f) for f in res.failures)


def test_exact_checks_on_small_instance():
    inst = validate_gap([2, 3], [[4, 1, 3, 2], [2, 5, 1, 3]], [[1, 2, 2, 1], [2, 1, 3, 2]])
    assert checks.coupling_exact(inst).passed
    assert checks.lemma3_check(inst).passed


def test_unknown_suite():
    with pytest.raises(ValueError):
        checks.run_suite("nope", 1, 0)
