"""Instances, assignments, permutations, generators and instance files.

Numbers are kept exact (:class:`fractions.Fraction`) whenever they enter as
integers, decimal strings or ``"p/q"`` strings; anything that arrives as a
binary float stays a float. An instance whose data is entirely exact is said
to be *rational*, and downstream code compares such data with zero tolerance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

Number = Union[Fraction, float]

#: absolute tolerance used for comparisons involving float data
FLOAT_TOL = 1e-9


# --------------------------------------------------------------------------
# errors


class InstanceError(ValueError):
    """Base class for invalid instance data."""


class DimensionMismatch(InstanceError):
    pass


class SizeExceedsCapacity(InstanceError):
    def __init__(self, bin: int, item: int):
        super().__init__(f"size of item {item} exceeds capacity of bin {bin}")
        self.bin = bin
        self.item = item


class NonPositiveSize(InstanceError):
    def __init__(self, bin: int, item: int):
        super().__init__(f"size of item {item} in bin {bin} is not positive")
        self.bin = bin
        self.item = item


class NonPositiveCapacity(InstanceError):
    def __init__(self, bin: int):
        super().__init__(f"capacity of bin {bin} is not positive")
        self.bin = bin


class NegativeValue(InstanceError):
    def __init__(self, bin: int, item: int):
        super().__init__(f"value of item {item} in bin {bin} is negative")
        self.bin = bin
        self.item = item


class NonPositiveValue(InstanceError):
    def __init__(self, item: int):
        super().__init__(f"value of item {item} is not positive")
        self.item = item


class EmptyInstance(InstanceError):
    pass


class BadRange(ValueError):
    pass


class UnknownFamily(ValueError):
    pass


class EmptySupport(ValueError):
    pass


class ParseError(ValueError):
    """Malformed instance file. ``location`` names the offending spot."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


# --------------------------------------------------------------------------
# numbers


def to_number(x) -> Number:
    """Exact for ints, Fractions, decimal strings and ``"p/q"``; float stays float."""
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite number {x!r}")
        return float(x)
    if isinstance(x, np.integer):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as a number")


def is_exact(x) -> bool:
    return isinstance(x, (Fraction, int)) and not isinstance(x, bool)


def leq(a: Number, b: Number, tol: float = FLOAT_TOL) -> bool:
    """``a <= b``; exact when both sides are exact, else with absolute ``tol``."""
    if is_exact(a) and is_exact(b):
        return a <= b
    return a <= b + tol


def _zero_like(exact: bool) -> Number:
    return Fraction(0) if exact else 0.0


def _fmt_number(x: Number):
    if isinstance(x, float):
        return x
    x = Fraction(x)
    if x.denominator == 1:
        return x.numerator
    return f"{x.numerator}/{x.denominator}"


# --------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class GapInstance:
    """Bins with capacities and per-(bin, item) value/size matrices.

    Indices are 0-based: ``values[i][j]`` is the value of item ``j`` in bin ``i``.
    Construct through :func:`validate_gap` or :meth:`create`.
    """

    capacities: tuple
    values: tuple
    sizes: tuple

    @classmethod
    def create(cls, capacities, values, sizes) -> "GapInstance":
        return validate_gap(capacities, values, sizes)

    @property
    def num_bins(self) -> int:
        return len(self.capacities)

    @property
    def num_items(self) -> int:
        return len(self.values[0])

    @cached_property
    def is_exact(self) -> bool:
        return all(map(is_exact, self.capacities)) and all(
            is_exact(x) for row in self.values + self.sizes for x in row
        )

    def to_float(self) -> "GapInstance":
        f = lambda rows: tuple(tuple(float(x) for x in r) for r in rows)
        return GapInstance(tuple(float(c) for c in self.capacities), f(self.values), f(self.sizes))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Float views ``(capacities, values, sizes)``."""
        return (
            np.array(self.capacities, dtype=float),
            np.array(self.values, dtype=float),
            np.array(self.sizes, dtype=float),
        )


@dataclass(frozen=True)
class KnapsackInstance:
    """Single knapsack; items are 0-based."""

    capacity: Number
    values: tuple
    sizes: tuple

    @classmethod
    def create(cls, capacity, values, sizes) -> "KnapsackInstance":
        return validate_knapsack(capacity, values, sizes)

    @property
    def num_items(self) -> int:
        return len(self.values)

    @cached_property
    def is_exact(self) -> bool:
        return is_exact(self.capacity) and all(map(is_exact, self.values + self.sizes))

    def density(self, j: int) -> Number:
        return self.values[j] / self.sizes[j]

    def to_float(self) -> "KnapsackInstance":
        return KnapsackInstance(
            float(self.capacity),
            tuple(float(v) for v in self.values),
            tuple(float(s) for s in self.sizes),
        )

    def as_gap(self) -> GapInstance:
        """The same data as a single-bin GAP instance."""
        return GapInstance((self.capacity,), (self.values,), (self.sizes,))


def coerce(inst, arithmetic: str | None = None):
    """Return ``inst`` in the requested arithmetic.

    ``None`` keeps the data as stored, ``"float"`` converts to floats and
    ``"rational"`` insists that the data is already exact.
    """
    if arithmetic is None:
        return inst
    if arithmetic == "float":
        return inst.to_float()
    if arithmetic == "rational":
        if not inst.is_exact:
            raise ValueError("rational arithmetic requested but instance holds float data")
        return inst
    raise ValueError(f"unknown arithmetic {arithmetic!r}")


def validate_gap(capacities, values, sizes) -> GapInstance:
    """Check every invariant and return a :class:`GapInstance`.

    Raises the error for the first violated invariant, scanning bins then items.
    """
    try:
        caps = tuple(to_number(c) for c in capacities)
        vals = tuple(tuple(to_number(x) for x in row) for row in values)
        szs = tuple(tuple(to_number(x) for x in row) for row in sizes)
    except TypeError as exc:
        raise DimensionMismatch(str(exc)) from exc
    m = len(caps)
    if m == 0:
        raise EmptyInstance("instance has no bins")
    if len(vals) != m or len(szs) != m:
        raise DimensionMismatch(f"expected {m} rows of values and sizes")
    n = len(vals[0])
    if n == 0:
        raise EmptyInstance("instance has no items")
    for i in range(m):
        if len(vals[i]) != n or len(szs[i]) != n:
            raise DimensionMismatch(f"row {i} does not have {n} entries")
    for i in range(m):
        if not caps[i] > 0:
            raise NonPositiveCapacity(i)
        for j in range(n):
            if not szs[i][j] > 0:
                raise NonPositiveSize(i, j)
            if szs[i][j] > caps[i]:
                raise SizeExceedsCapacity(i, j)
            if vals[i][j] < 0:
                raise NegativeValue(i, j)
    return GapInstance(caps, vals, szs)


def validate_knapsack(capacity, values, sizes) -> KnapsackInstance:
    try:
        cap = to_number(capacity)
        vals = tuple(to_number(v) for v in values)
        szs = tuple(to_number(s) for s in sizes)
    except TypeError as exc:
        raise DimensionMismatch(str(exc)) from exc
    if len(vals) != len(szs):
        raise DimensionMismatch("values and sizes differ in length")
    if not vals:
        raise EmptyInstance("instance has no items")
    if not cap > 0:
        raise NonPositiveCapacity(0)
    for j, (v, s) in enumerate(zip(vals, szs)):
        if not s > 0:
            raise NonPositiveSize(0, j)
        if s > cap:
            raise SizeExceedsCapacity(0, j)
        if not v > 0:
            raise NonPositiveValue(j)
    return KnapsackInstance(cap, vals, szs)


# --------------------------------------------------------------------------
# permutations and assignments


@dataclass(frozen=True)
class Permutation:
    """Arrival order: ``order[l]`` is the item revealed in round ``l + 1``."""

    order: tuple

    def __post_init__(self):
        order = tuple(int(k) for k in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"{order} is not a permutation of range({len(order)})")
        object.__setattr__(self, "order", order)

    def __len__(self) -> int:
        return len(self.order)

    def __getitem__(self, k: int) -> int:
        return self.order[k]

    def __iter__(self):
        return iter(self.order)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))


def _as_rows(entries) -> tuple:
    rows = tuple(tuple(r) for r in entries)
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise DimensionMismatch("assignment must be a non-empty rectangular matrix")
    return rows


@dataclass(frozen=True)
class Assignment:
    """Binary ``m x n`` decision matrix; every item sits in at most one bin."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in r) for r in _as_rows(self.entries))
        if any(x not in (0, 1) for r in rows for x in r):
            raise ValueError("assignment entries must be 0 or 1")
        for j in range(len(rows[0])):
            if sum(r[j] for r in rows) > 1:
                raise ValueError(f"item {j} assigned to more than one bin")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def zeros(cls, m: int, n: int) -> "Assignment":
        return cls(tuple((0,) * n for _ in range(m)))

    @classmethod
    def from_bins(cls, bins: Sequence, m: int) -> "Assignment":
        """``bins[j]`` is the bin of item ``j`` or ``None``."""
        n = len(bins)
        return cls(tuple(tuple(int(bins[j] == i) for j in range(n)) for i in range(m)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def bin_of(self, j: int) -> int | None:
        for i, row in enumerate(self.entries):
            if row[j]:
                return i
        return None

    def items_in(self, i: int) -> list[int]:
        return [j for j, x in enumerate(self.entries[i]) if x]


@dataclass(frozen=True)
class FractionalAssignment:
    """``m x n`` matrix with entries in [0, 1] and column sums at most 1."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(to_number(x) for x in r) for r in _as_rows(self.entries))
        for r in rows:
            for x in r:
                if not (leq(0, x) and leq(x, 1)):
                    raise ValueError(f"fractional entry {x} outside [0, 1]")
        for j in range(len(rows[0])):
            if not leq(sum(r[j] for r in rows), 1):
                raise ValueError(f"column {j} sums to more than 1")
        object.__setattr__(self, "entries", rows)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def column(self, j: int) -> tuple:
        return tuple(r[j] for r in self.entries)


def _check_shape(x, inst: GapInstance):
    if x.shape != (inst.num_bins, inst.num_items):
        raise DimensionMismatch(
            f"assignment shape {x.shape} does not match instance "
            f"({inst.num_bins}, {inst.num_items})"
        )


def _gap_view(inst) -> GapInstance:
    return inst.as_gap() if isinstance(inst, KnapsackInstance) else inst


def value_of(x, inst) -> Number:
    """Total value ``sum_ij v_ij x_ij``."""
    inst = _gap_view(inst)
    _check_shape(x, inst)
    terms = [v * e for vr, xr in zip(inst.values, x.entries) for v, e in zip(vr, xr) if e]
    if not terms:
        return _zero_like(inst.is_exact)
    return sum(terms[1:], terms[0])


def bin_load(x, inst, i: int) -> Number:
    inst = _gap_view(inst)
    _check_shape(x, inst)
    if not 0 <= i < inst.num_bins:
        raise IndexError(f"bin {i} out of range")
    load = _zero_like(inst.is_exact)
    for s, e in zip(inst.sizes[i], x.entries[i]):
        if e:
            load += s * e
    return load


@dataclass(frozen=True)
class FeasibilityReport:
    satisfies_c1: tuple
    slack: tuple
    satisfies_c2: tuple
    overflow_items: tuple

    @property
    def feasible(self) -> bool:
        return all(self.satisfies_c1) and all(self.satisfies_c2)


def check_feasibility(x, inst, order: Iterable[int] | None = None) -> FeasibilityReport:
    """Flag capacity (C1) and one-bin-per-item (C2) violations.

    ``overflow_items[i]`` lists the items of bin ``i`` whose inclusion, walking
    items in ``order`` (index order by default), leaves the load above capacity.
    """
    inst = _gap_view(inst)
    _check_shape(x, inst)
    m, n = inst.num_bins, inst.num_items
    order = list(range(n)) if order is None else list(order)
    c1, slack, overflow = [], [], []
    for i in range(m):
        load = bin_load(x, inst, i)
        slack.append(inst.capacities[i] - load)
        c1.append(leq(load, inst.capacities[i]))
        running, over = _zero_like(inst.is_exact), []
        for j in order:
            e = x.entries[i][j]
            if e:
                running += inst.sizes[i][j] * e
                if not leq(running, inst.capacities[i]):
                    over.append(j)
        overflow.append(tuple(over))
    c2 = tuple(leq(sum(x.entries[i][j] for i in range(m)), 1) for j in range(n))
    return FeasibilityReport(tuple(c1), tuple(slack), c2, tuple(overflow))


# --------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class GapRanges:
    """Inclusive integer ranges for :func:`gen_uniform_gap`."""

    values: tuple = (0, 10)
    sizes: tuple = (1, 10)
    capacities: tuple = (10, 20)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _randint(rng, lo, hi, size):
    return [Fraction(int(k)) for k in rng.integers(lo, hi, size=size, endpoint=True)]


def gen_uniform_gap(n: int, m: int, seed: int, ranges: GapRanges = GapRanges()) -> GapInstance:
    """Integer data drawn uniformly from ``ranges``; a pure function of its arguments."""
    if n < 1 or m < 1:
        raise BadRange("need n >= 1 and m >= 1")
    (vlo, vhi), (slo, shi), (clo, chi) = ranges.values, ranges.sizes, ranges.capacities
    if not (0 <= vlo <= vhi and 0 < slo <= shi and 0 < clo <= chi):
        raise BadRange(f"malformed ranges {ranges}")
    if shi > clo:
        raise BadRange("largest size must not exceed the smallest capacity")
    rng = _rng(seed)
    caps = _randint(rng, clo, chi, m)
    vals = [_randint(rng, vlo, vhi, n) for _ in range(m)]
    szs = [_randint(rng, slo, shi, n) for _ in range(m)]
    return validate_gap(caps, vals, szs)


KNAPSACK_FAMILIES = ("uncorrelated", "weakly-correlated", "strongly-correlated", "subset-sum")


def gen_knapsack_family(family: str, n: int, seed: int, params: Mapping | None = None) -> KnapsackInstance:
    """Classic knapsack test families with integer data.

    ``params``: ``R`` (size/value range, default 100), ``offset`` (strongly
    correlated shift, default ``R // 10``), ``capacity_ratio`` (capacity as a
    fraction of total size, default 1/2) or an explicit ``capacity``.
    """
    if family not in KNAPSACK_FAMILIES:
        raise UnknownFamily(f"unknown family {family!r}; choose from {KNAPSACK_FAMILIES}")
    if n < 1:
        raise BadRange("need n >= 1")
    params = dict(params or {})
    R = int(params.get("R", 100))
    if R < 1:
        raise BadRange("R must be positive")
    rng = _rng(seed)
    sizes = _randint(rng, 1, R, n)
    if family == "uncorrelated":
        values = _randint(rng, 1, R, n)
    elif family == "weakly-correlated":
        spread = max(R // 10, 1)
        noise = _randint(rng, -spread, spread, n)
        values = [max(s + e, Fraction(1)) for s, e in zip(sizes, noise)]
    elif family == "strongly-correlated":
        offset = to_number(params.get("offset", max(R // 10, 1)))
        values = [s + offset for s in sizes]
    else:
        values = list(sizes)
    if "capacity" in params:
        capacity = to_number(params["capacity"])
    else:
        ratio = to_number(params.get("capacity_ratio", Fraction(1, 2)))
        capacity = max(max(sizes), Fraction(math.floor(ratio * sum(sizes))))
    return validate_knapsack(capacity, values, sizes)


@dataclass(frozen=True)
class DiscreteDistribution:
    support: tuple
    weights: tuple

    @classmethod
    def parse(cls, text: str) -> "DiscreteDistribution":
        """``point:5``, ``uniform:1,2,3`` or ``discrete:1@0.25,4@0.75``."""
        kind, _, body = text.partition(":")
        items = [p for p in body.split(",") if p.strip()]
        if kind == "point":
            if len(items) != 1:
                raise EmptySupport("point distribution needs exactly one value")
            return cls((to_number(items[0]),), (Fraction(1),))
        if kind == "uniform":
            vals = tuple(to_number(p) for p in items)
            return cls(vals, tuple(Fraction(1, len(vals)) for _ in vals) if vals else ())
        if kind == "discrete":
            pairs = [p.split("@") for p in items]
            if any(len(p) != 2 for p in pairs):
                raise ValueError(f"malformed discrete distribution {text!r}")
            return cls(tuple(to_number(v) for v, _ in pairs), tuple(to_number(w) for _, w in pairs))
        raise ValueError(f"unknown distribution kind {kind!r}")


def gen_unit_iid(n: int, distribution: DiscreteDistribution | str, seed: int) -> KnapsackInstance:
    """Unit sizes, unit capacity, i.i.d. values from a finite distribution."""
    if isinstance(distribution, str):
        distribution = DiscreteDistribution.parse(distribution)
    if not distribution.support:
        raise EmptySupport("distribution has empty support")
    if n < 1:
        raise BadRange("need n >= 1")
    w = np.array([float(x) for x in distribution.weights])
    if (w < 0).any() or w.sum() <= 0:
        raise EmptySupport("distribution has no positive mass")
    rng = _rng(seed)
    picks = rng.choice(len(distribution.support), size=n, p=w / w.sum())
    values = [distribution.support[k] for k in picks]
    return validate_knapsack(1, values, [1] * n)


# --------------------------------------------------------------------------
# instance files


def save_instance(inst) -> bytes:
    if isinstance(inst, GapInstance):
        doc = {
            "kind": "gap",
            "capacities": [_fmt_number(c) for c in inst.capacities],
            "values": [[_fmt_number(x) for x in r] for r in inst.values],
            "sizes": [[_fmt_number(x) for x in r] for r in inst.sizes],
        }
    elif isinstance(inst, KnapsackInstance):
        doc = {
            "kind": "knapsack",
            "capacity": _fmt_number(inst.capacity),
            "values": [_fmt_number(x) for x in inst.values],
            "sizes": [_fmt_number(x) for x in inst.sizes],
        }
    else:
        raise TypeError(f"cannot save {type(inst).__name__}")
    return (json.dumps(doc, indent=2) + "\n").encode()


_FIELDS = {
    "gap": {"kind", "capacities", "values", "sizes"},
    "knapsack": {"kind", "capacity", "values", "sizes"},
}


def _parse_num(x, where: str) -> Number:
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise ParseError(f"expected a number, got {x!r}", where)
    try:
        return to_number(x)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad number {x!r}", where) from exc


def _parse_list(x, where: str) -> list:
    if not isinstance(x, list):
        raise ParseError("expected an array", where)
    return [_parse_num(e, f"{where}[{k}]") for k, e in enumerate(x)]


def load_instance(data: bytes | str):
    """Parse an instance file and validate it."""
    if isinstance(data, bytes):
        data = data.decode()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")
    kind = doc.get("kind")
    if kind not in _FIELDS:
        raise ParseError(f"kind must be 'gap' or 'knapsack', got {kind!r}", "$.kind")
    missing = _FIELDS[kind] - doc.keys()
    if missing:
        raise ParseError(f"missing fields {sorted(missing)}", "$")
    unknown = doc.keys() - _FIELDS[kind]
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}", "$")
    if kind == "gap":
        caps = _parse_list(doc["capacities"], "$.capacities")
        for name in ("values", "sizes"):
            if not isinstance(doc[name], list):
                raise ParseError("expected an array of arrays", f"$.{name}")
        vals = [_parse_list(r, f"$.values[{i}]") for i, r in enumerate(doc["values"])]
        szs = [_parse_list(r, f"$.sizes[{i}]") for i, r in enumerate(doc["sizes"])]
        return validate_gap(caps, vals, szs)
    cap = _parse_num(doc["capacity"], "$.capacity")
    return validate_knapsack(cap, _parse_list(doc["values"], "$.values"), _parse_list(doc["sizes"], "$.sizes"))


# --------------------------------------------------------------------------
# generator spec strings


GENERATORS = ("gap", "knapsack", "unit-iid")


def _range(text: str) -> tuple:
    lo, _, hi = text.partition(",")
    return (int(lo), int(hi or lo))


def parse_generator_spec(spec: str) -> tuple[str, dict]:
    """Split ``"gap n=5 m=2 v=0,10"`` into ``("gap", {"n": "5", ...})``."""
    tokens = spec.split()
    if not tokens or tokens[0] not in GENERATORS:
        raise ValueError(f"generator spec must start with one of {GENERATORS}: {spec!r}")
    params = {}
    for tok in tokens[1:]:
        key, eq, val = tok.partition("=")
        if not eq or not key:
            raise ValueError(f"expected key=value, got {tok!r}")
        params[key] = val
    return tokens[0], params


def generate_from_spec(spec: str, seed: int | None = None):
    """Build an instance from a flat generator spec.

    ``gap n= m= [v=lo,hi s=lo,hi c=lo,hi]``,
    ``knapsack family= n= [R= offset= capacity_ratio= capacity=]``,
    ``unit-iid n= dist=``. A ``seed=`` key overrides ``seed``.
    """
    kind, params = parse_generator_spec(spec)
    seed = int(params.pop("seed", seed if seed is not None else 0))
    try:
        n = int(params.pop("n"))
    except KeyError:
        raise ValueError("generator spec needs n=") from None
    if kind == "gap":
        m = int(params.pop("m", 1))
        ranges = GapRanges(
            values=_range(params.pop("v", "0,10")),
            sizes=_range(params.pop("s", "1,10")),
            capacities=_range(params.pop("c", "10,20")),
        )
        if params:
            raise ValueError(f"unknown gap generator keys {sorted(params)}")
        return gen_uniform_gap(n, m, seed, ranges)
    if kind == "knapsack":
        family = params.pop("family", "uncorrelated")
        unknown = params.keys() - {"R", "offset", "capacity_ratio", "capacity"}
        if unknown:
            raise ValueError(f"unknown knapsack generator keys {sorted(unknown)}")
        return gen_knapsack_family(family, n, seed, params)
    dist = params.pop("dist", None)
    if dist is None or params:
        raise ValueError("unit-iid generator takes exactly n= and dist=")
    return gen_unit_iid(n, dist, seed)
