from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from randorder.model import (
    KnapsackInstance,
    check_feasibility,
    gen_uniform_gap,
    validate_knapsack,
    value_of,
)
from randorder.offline import (
    BudgetExceeded,
    LpCache,
    fractional_greedy,
    solve_fractional_gap,
    solve_integral_gap_bnb,
    solve_integral_gap_bruteforce,
    solve_integral_knapsack_bruteforce,
    verify_lp_optimality,
)


def scipy_lp(inst, integral=False):
    m, n = inst.num_bins, inst.num_items
    v = np.array(inst.values, dtype=float).ravel()
    s = np.array(inst.sizes, dtype=float)
    A_cap = np.zeros((m, m * n))
    for i in range(m):
        A_cap[i, i * n:(i + 1) * n] = s[i]
    A_item = np.zeros((n, m * n))
    for j in range(n):
        A_item[j, j::n] = 1
    A = np.vstack([A_cap, A_item])
    b = np.concatenate([np.array(inst.capacities, dtype=float), np.ones(n)])
    if integral:
        res = milp(-v, constraints=LinearConstraint(A, -np.inf, b),
                   integrality=np.ones(m * n), bounds=Bounds(0, 1))
    else:
        res = linprog(-v, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
    assert res.status == 0
    return -res.fun


def test_greedy_worked_example():
    inst = validate_knapsack(10, [8, 6, 3], [4, 5, 3])
    sol = fractional_greedy(inst)
    assert sol.fractions == (1, 1, Fraction(1, 3))
    assert sol.objective == 15
    assert sol.rho == 2
    assert sol.total_size == 10


def test_greedy_ties_broken_by_index():
    inst = validate_knapsack(1, [2, 2], [1, 1])
    assert fractional_greedy(inst).fractions == (1, 0)


def test_greedy_on_subset_ignores_other_items():
    inst = validate_knapsack(10, [8, 6, 3], [4, 5, 3])
    sol = fractional_greedy(inst, [1, 2])
    assert sol.fractions == (0, 1, 1)


def test_lp_matches_greedy_on_worked_example():
    inst = validate_knapsack(10, [8, 6, 3], [4, 5, 3])
    lp = solve_fractional_gap(inst.as_gap())
    assert lp.objective == 15
    assert verify_lp_optimality(inst.as_gap(), range(3), lp).ok


def test_lp_exact_against_scipy():
    for seed in range(15):
        inst = gen_uniform_gap(6, 3, seed)
        lp = solve_fractional_gap(inst)
        assert isinstance(lp.objective, Fraction)
        assert verify_lp_optimality(inst, range(6), lp).ok
        assert float(lp.objective) == pytest.approx(scipy_lp(inst), rel=1e-8)


def test_lp_float_mode():
    inst = gen_uniform_gap(7, 2, 3).to_float()
    lp = solve_fractional_gap(inst)
    assert isinstance(lp.objective, float)
    assert verify_lp_optimality(inst, range(7), lp).ok
    assert lp.objective == pytest.approx(scipy_lp(inst), rel=1e-8)


def test_lp_subset_zeroes_other_columns():
    inst = gen_uniform_gap(5, 2, 7)
    lp = solve_fractional_gap(inst, [0, 3])
    for row in lp.primal.entries:
        assert all(row[j] == 0 for j in (1, 2, 4))
    assert lp.item_prices[1] == 0
    assert verify_lp_optimality(inst, [0, 3], lp).ok


def test_lp_rejects_empty_subset():
    with pytest.raises(ValueError):
        solve_fractional_gap(gen_uniform_gap(3, 2, 0), [])


def test_certificate_rejects_corrupted_duals():
    inst = validate_knapsack(10, [8, 6, 3], [4, 5, 3]).as_gap()
    lp = solve_fractional_gap(inst)
    bad = replace(lp, bin_prices=(lp.bin_prices[0] + 1,))
    rep = verify_lp_optimality(inst, range(3), bad)
    assert not rep.ok
    assert any("bin 0" in v or "item" in v for v in rep.violations)
    neg = replace(lp, item_prices=(-1, *lp.item_prices[1:]))
    rep = verify_lp_optimality(inst, range(3), neg)
    assert not rep.dual_feasible
    assert any("item 0" in v for v in rep.violations)


def test_lp_cache_hits():
    inst = gen_uniform_gap(4, 2, 1)
    cache = LpCache(inst)
    a = cache.solve([0, 1])
    b = cache.solve((1, 0))
    assert a is b and cache.hits == 1


def test_bruteforce_matches_bnb_and_milp():
    for seed in range(20):
        inst = gen_uniform_gap(5, 2, seed)
        x, val = solve_integral_gap_bruteforce(inst)
        assert val == solve_integral_gap_bnb(inst)
        assert float(val) == pytest.approx(scipy_lp(inst, integral=True), abs=1e-6)
        assert check_feasibility(x, inst).feasible and value_of(x, inst) == val


def test_bruteforce_budget():
    inst = gen_uniform_gap(12, 3, 0)
    with pytest.raises(BudgetExceeded):
        solve_integral_gap_bruteforce(inst, budget=1000)


def test_integral_knapsack_small():
    inst = validate_knapsack(10, [8, 6, 3], [4, 5, 3])
    # best subset {0,1} has size 9
    assert solve_integral_knapsack_bruteforce(inst) == 14


def test_lp_at_least_integral():
    for seed in range(10):
        inst = gen_uniform_gap(5, 3, seed)
        assert solve_fractional_gap(inst).objective >= solve_integral_gap_bruteforce(inst)[1]


fracs = st.fractions(min_value=Fraction(1, 20), max_value=10, max_denominator=20)


@st.composite
def knapsacks(draw):
    n = draw(st.integers(1, 7))
    sizes = [draw(fracs) for _ in range(n)]
    cap = max(sizes) + draw(st.fractions(min_value=0, max_value=int(sum(sizes)) + 1, max_denominator=20))
    values = [draw(fracs) for _ in range(n)]
    return validate_knapsack(cap, values, sizes)


@settings(max_examples=150, deadline=None)
@given(knapsacks())
def test_greedy_equals_lp(inst: KnapsackInstance):
    g = fractional_greedy(inst)
    lp = solve_fractional_gap(inst.as_gap())
    assert g.objective == lp.objective
    assert g.total_size <= inst.capacity


@settings(max_examples=150, deadline=None)
@given(knapsacks(), st.data())
def test_greedy_fractions_monotone(inst, data):
    n = inst.num_items
    order = data.draw(st.permutations(range(n)))
    prev = None
    for k in range(1, n + 1):
        cur = fractional_greedy(inst, order[:k])
        if prev is not None:
            assert all(cur.fractions[j] <= prev.fractions[j] for j in order[:k - 1])
            assert cur.total_size >= prev.total_size
        prev = cur
