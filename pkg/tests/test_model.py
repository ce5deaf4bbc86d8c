from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from randorder.model import (
    Assignment,
    BadRange,
    DimensionMismatch,
    EmptyInstance,
    EmptySupport,
    FractionalAssignment,
    GapInstance,
    GapRanges,
    KnapsackInstance,
    NonPositiveSize,
    ParseError,
    Permutation,
    SizeExceedsCapacity,
    UnknownFamily,
    bin_load,
    check_feasibility,
    gen_knapsack_family,
    gen_uniform_gap,
    gen_unit_iid,
    generate_from_spec,
    load_instance,
    save_instance,
    validate_gap,
    value_of,
)


def test_validate_accepts_size_equal_to_capacity():
    inst = validate_gap([1], [[1]], [[1]])
    assert inst.num_items == 1 and inst.num_bins == 1


def test_validate_rejects_oversized_item():
    with pytest.raises(SizeExceedsCapacity) as exc:
        validate_gap([1], [[1]], [["1.5"]])
    assert (exc.value.bin, exc.value.item) == (0, 0)


def test_validate_rejects_zero_size():
    with pytest.raises(NonPositiveSize) as exc:
        validate_gap([5, 5], [[1, 1], [1, 1]], [[1, 1], [0, 1]])
    assert (exc.value.bin, exc.value.item) == (1, 0)


@pytest.mark.parametrize(
    "caps, vals, szs, err",
    [
        ([1], [[1, 2]], [[1]], DimensionMismatch),
        ([1, 2], [[1]], [[1]], DimensionMismatch),
        ([1], [[]], [[]], EmptyInstance),
        ([], [], [], EmptyInstance),
    ],
)
def test_validate_shape_errors(caps, vals, szs, err):
    with pytest.raises(err):
        validate_gap(caps, vals, szs)


def test_exact_numbers_stay_exact():
    inst = validate_gap(["3/2"], [["0.25"]], [[1]])
    assert inst.capacities == (Fraction(3, 2),)
    assert inst.values[0][0] == Fraction(1, 4)
    assert inst.is_exact
    assert not validate_gap([1.5], [[1]], [[1]]).is_exact


def test_value_of_and_bin_load():
    inst = validate_gap([10], [[7, 8, 2]], [[3, 4, 5]])
    assert value_of(Assignment.zeros(1, 3), inst) == 0
    assert value_of(Assignment(((1, 0, 0),)), inst) == 7
    assert value_of(FractionalAssignment((("1/2", 0, 0),)), validate_gap([10], [[8, 1, 1]], [[1, 1, 1]])) == 4
    assert bin_load(Assignment.zeros(1, 3), inst, 0) == 0
    assert bin_load(Assignment(((1, 0, 0),)), inst, 0) == 3
    assert bin_load(Assignment(((1, 1, 0),)), inst, 0) == 7
    with pytest.raises(IndexError):
        bin_load(Assignment.zeros(1, 3), inst, 1)
    with pytest.raises(DimensionMismatch):
        value_of(Assignment.zeros(2, 3), inst)


def test_assignment_rejects_double_assignment():
    with pytest.raises(ValueError):
        Assignment(((1, 0), (1, 0)))


def test_feasibility_report():
    inst = validate_gap([5, 5], [[1, 1, 1], [1, 1, 1]], [[3, 3, 2], [1, 1, 1]])
    ok = check_feasibility(Assignment(((1, 0, 1), (0, 1, 0))), inst)
    assert ok.feasible and ok.overflow_items == ((), ())
    assert ok.slack == (0, 4)
    over = check_feasibility(Assignment(((1, 1, 0), (0, 0, 1))), inst)
    assert over.satisfies_c1 == (False, True)
    assert over.slack[0] == -1
    assert over.overflow_items[0] == (1,)
    # C2 is checked on fractional data (a binary Assignment cannot violate it)
    frac = check_feasibility(FractionalAssignment(((1, 0, 0), (0, 0, 0))), inst)
    assert all(frac.satisfies_c2)


def test_feasibility_flags_column_sum():
    class Raw:
        entries = ((1, 0), (1, 0))
        shape = (2, 2)

    inst = validate_gap([5, 5], [[1, 1], [1, 1]], [[1, 1], [1, 1]])
    rep = check_feasibility(Raw(), inst)
    assert rep.satisfies_c2 == (False, True)


def test_permutation_must_be_bijection():
    assert list(Permutation((2, 0, 1))) == [2, 0, 1]
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


def test_gen_uniform_gap_deterministic():
    a = gen_uniform_gap(5, 2, 1)
    assert a == gen_uniform_gap(5, 2, 1)
    assert a != gen_uniform_gap(5, 2, 2)
    assert validate_gap(a.capacities, a.values, a.sizes) == a
    with pytest.raises(BadRange):
        gen_uniform_gap(5, 2, 1, GapRanges(sizes=(1, 30), capacities=(10, 20)))


def test_knapsack_families():
    ss = gen_knapsack_family("subset-sum", 20, 4)
    assert ss.values == ss.sizes
    sc = gen_knapsack_family("strongly-correlated", 20, 4, {"offset": 10})
    assert all(v == s + 10 for v, s in zip(sc.values, sc.sizes))
    assert gen_knapsack_family("uncorrelated", 9, 3) == gen_knapsack_family("uncorrelated", 9, 3)
    for fam in ("uncorrelated", "weakly-correlated"):
        inst = gen_knapsack_family(fam, 30, 8)
        assert all(0 < s <= inst.capacity for s in inst.sizes)
        assert all(v > 0 for v in inst.values)
    with pytest.raises(UnknownFamily):
        gen_knapsack_family("nope", 3, 1)


def test_unit_iid():
    inst = gen_unit_iid(10, "point:5", 3)
    assert inst.capacity == 1 and set(inst.sizes) == {1}
    assert set(inst.values) == {5}
    mixed = gen_unit_iid(50, "discrete:1@0.5,9@0.5", 2)
    assert mixed == gen_unit_iid(50, "discrete:1@0.5,9@0.5", 2)
    assert set(mixed.values) <= {1, 9}
    with pytest.raises(EmptySupport):
        gen_unit_iid(3, "uniform:", 1)


def test_generate_from_spec():
    assert generate_from_spec("gap n=5 m=2", 1) == gen_uniform_gap(5, 2, 1)
    assert generate_from_spec("gap n=5 m=2 seed=1", 99) == gen_uniform_gap(5, 2, 1)
    assert isinstance(generate_from_spec("knapsack family=subset-sum n=4"), KnapsackInstance)
    with pytest.raises(ValueError):
        generate_from_spec("gap n=5 bogus=1")


def test_file_round_trip():
    inst = validate_gap(["3/2", 2], [["1/3", 0], [1, "0.5"]], [[1, "1/2"], [2, 2]])
    assert load_instance(save_instance(inst)) == inst
    floats = validate_gap([1.1], [[0.1, 0.2]], [[0.30000000000000004, 1.0]])
    back = load_instance(save_instance(floats))
    assert back == floats
    assert back.sizes[0][0] == 0.30000000000000004


def test_load_errors():
    data = save_instance(gen_uniform_gap(3, 1, 0))
    with pytest.raises(ParseError):
        load_instance(data[: len(data) // 2])
    with pytest.raises(ParseError, match="unknown"):
        load_instance(b'{"kind": "knapsack", "capacity": 1, "values": [1], "sizes": [1], "x": 0}')
    with pytest.raises(ParseError, match="values"):
        load_instance(b'{"kind": "knapsack", "capacity": 1, "values": ["a"], "sizes": [1]}')
    with pytest.raises(SizeExceedsCapacity):
        load_instance(b'{"kind": "gap", "capacities": [1], "values": [[1]], "sizes": [["3/2"]]}')


rationals = st.fractions(min_value=Fraction(1, 50), max_value=10, max_denominator=50)


@st.composite
def gap_instances(draw):
    m = draw(st.integers(1, 3))
    n = draw(st.integers(1, 5))
    caps = [draw(rationals) for _ in range(m)]
    sizes = [[draw(st.fractions(min_value=Fraction(1, 100), max_value=c, max_denominator=100))
              for _ in range(n)] for c in caps]
    values = [[draw(st.fractions(min_value=0, max_value=20, max_denominator=7)) for _ in range(n)]
              for _ in range(m)]
    return validate_gap(caps, values, sizes)


@settings(max_examples=200, deadline=None)
@given(gap_instances())
def test_round_trip_property(inst):
    assert load_instance(save_instance(inst)) == inst


@settings(max_examples=200, deadline=None)
@given(gap_instances(), st.data())
def test_feasibility_consistent_with_load(inst, data):
    bins = [data.draw(st.sampled_from([None, *range(inst.num_bins)])) for _ in range(inst.num_items)]
    x = Assignment.from_bins(bins, inst.num_bins)
    rep = check_feasibility(x, inst)
    for i in range(inst.num_bins):
        load = bin_load(x, inst, i)
        assert rep.satisfies_c1[i] == (load <= inst.capacities[i])
        assert rep.slack[i] == inst.capacities[i] - load
