from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import given, settings, strategies as st

from randorder.model import Permutation, gen_knapsack_family, validate_knapsack
from randorder.offline import fractional_greedy
from randorder.online_knapsack import (
    GreedyCache,
    compensation_term,
    default_t,
    run_fractional_knapsack,
)


def test_default_t():
    assert [default_t(n) for n in (1, 2, 3, 8, 100)] == [0, 0, 1, 2, 36]


def test_compensation_example():
    # capacity 2, unit sizes; the 10 arriving last pushes out the post-sample 3
    inst = validate_knapsack(2, [4, 3, 10], [1, 1, 1])
    run = run_fractional_knapsack(inst, (0, 1, 2), t=1)
    r2, r3 = run.rounds
    assert (r2.item, r2.compensation, r2.packed_fraction) == (1, 0, 1)
    assert (r3.item, r3.greedy_fraction, r3.compensation, r3.packed_fraction) == (2, 1, 1, 0)
    assert run.fractions == (0, 1, 0)
    assert run.value == 3 and run.total_size == 1


def test_compensation_term_direct():
    inst = validate_knapsack(2, [4, 3, 10], [1, 1, 1])
    perm = Permutation((0, 1, 2))
    prev = fractional_greedy(inst, [0, 1])
    curr = fractional_greedy(inst, [0, 1, 2])
    assert compensation_term(inst, perm, 3, prev, curr, t=1) == 1
    # over all earlier rounds the sample item is counted too: it is unchanged here
    assert compensation_term(inst, perm, 3, prev, curr, t=1, start=1) == 1


def test_three_unit_items_average():
    # per-order values: (3,2,1)->0 (3,1,2)->0 (2,3,1)->3 (2,1,3)->3 (1,3,2)->3 (1,2,3)->2
    inst = validate_knapsack(1, [3, 2, 1], [1, 1, 1])
    vals = [run_fractional_knapsack(inst, p).value for p in permutations(range(3))]
    assert sorted(vals) == [0, 0, 2, 3, 3, 3]
    assert Fraction(sum(vals), 6) == Fraction(11, 6)
    assert Fraction(11, 6) >= Fraction(1, 2) * 3


def test_t_zero_packs_greedy_of_prefix():
    inst = validate_knapsack(3, [5, 1], [2, 2])
    run = run_fractional_knapsack(inst, (0, 1), t=0)
    assert run.fractions == (1, Fraction(1, 2))


def test_float_mode_matches_exact():
    inst = gen_knapsack_family("uncorrelated", 9, 4)
    perm = (3, 1, 4, 0, 5, 8, 2, 7, 6)
    exact = run_fractional_knapsack(inst, perm)
    flt = run_fractional_knapsack(inst, perm, arithmetic="float")
    assert isinstance(flt.value, float)
    assert flt.value == pytest.approx(float(exact.value), rel=1e-9)
    assert not exact.clamped


def test_bad_arguments():
    inst = validate_knapsack(2, [1, 1], [1, 1])
    with pytest.raises(ValueError):
        run_fractional_knapsack(inst, (0,))
    with pytest.raises(ValueError):
        run_fractional_knapsack(inst, (0, 1), t=3)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(["uncorrelated", "weakly-correlated", "strongly-correlated", "subset-sum"]),
       st.integers(1, 9), st.integers(0, 10**6), st.data())
def test_run_invariants(family, n, seed, data):
    inst = gen_knapsack_family(family, n, seed)
    perm = Permutation(tuple(data.draw(st.permutations(range(n)))))
    cache = GreedyCache(inst)
    run = run_fractional_knapsack(inst, perm, cache=cache)
    assert all(0 <= f <= 1 for f in run.fractions)
    assert run.total_size <= inst.capacity
    assert run.value == sum(v * f for v, f in zip(inst.values, run.fractions))
    for r in run.rounds:
        assert r.compensation >= 0
        assert r.packed_fraction <= r.greedy_fraction
