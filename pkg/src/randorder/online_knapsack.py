"""Online fractional knapsack with a sampling phase and displacement compensation.

After observing the first ``t = floor(n/e)`` items, each arriving item is packed
by the size it occupies in the greedy solution of the revealed items, minus
the size by which that arrival pushes earlier *post-sample* items out of the
greedy solution. Sample items absorb displacement for free, which is what
keeps the packed total within capacity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .model import FLOAT_TOL, FractionalAssignment, KnapsackInstance, Number, Permutation, coerce
from .offline import GreedySolution, fractional_greedy

DRIFT_TOL = 1e-9


class NegativeSummand(ArithmeticError):
    pass


class ClampRequired(ArithmeticError):
    """A packed fraction left [0, 1] by more than rounding can explain."""


def default_t(n: int) -> int:
    return math.floor(n / math.e)


class GreedyCache:
    """Memoizes :func:`fractional_greedy` per item subset for one instance."""

    def __init__(self, inst: KnapsackInstance):
        self.inst = inst
        self._memo: dict[frozenset, GreedySolution] = {}

    def solve(self, items) -> GreedySolution:
        key = frozenset(items)
        sol = self._memo.get(key)
        if sol is None:
            sol = self._memo[key] = fractional_greedy(self.inst, key)
        return sol


@dataclass(frozen=True)
class KnapsackRound:
    round: int  # 1-based
    item: int
    greedy_fraction: Number
    compensation: Number
    raw_fraction: Number  # before any clamping
    packed_fraction: Number


@dataclass(frozen=True)
class KnapsackRun:
    fractions: tuple  # packed fraction per item
    rounds: tuple
    value: Number
    total_size: Number
    t: int

    @property
    def assignment(self) -> FractionalAssignment:
        return FractionalAssignment((self.fractions,))

    @property
    def clamped(self) -> bool:
        return any(r.raw_fraction != r.packed_fraction for r in self.rounds)

    def to_records(self) -> list[dict]:
        return [
            {
                "round": r.round,
                "item": r.item,
                "greedy_fraction": str(r.greedy_fraction),
                "compensation": str(r.compensation),
                "raw_fraction": str(r.raw_fraction),
                "packed_fraction": str(r.packed_fraction),
            }
            for r in self.rounds
        ]


def compensation_term(inst: KnapsackInstance, perm: Permutation, ell: int,
                      greedy_prev: GreedySolution, greedy_curr: GreedySolution,
                      t: int | None = None, start: int | None = None) -> Number:
    """Size displaced from the greedy solution by the arrival in round ``ell``.

    Sums ``s_k * (frac_prev_k - frac_curr_k)`` over the items of rounds
    ``start..ell-1`` (``start`` defaults to ``t + 1``). Every summand must be
    nonnegative: adding an item never raises another item's greedy fraction.
    """
    t = default_t(inst.num_items) if t is None else t
    start = t + 1 if start is None else start
    exact = inst.is_exact
    total = Fraction(0) if exact else 0.0
    for k in range(start, ell):
        j = perm[k - 1]
        d = inst.sizes[j] * (greedy_prev.fractions[j] - greedy_curr.fractions[j])
        if d < 0 and (exact or d < -FLOAT_TOL):
            raise NegativeSummand(f"item {j} gained {-d} size when round {ell} arrived")
        total += d
    return total


def run_fractional_knapsack(inst: KnapsackInstance, perm, t: int | None = None,
                            arithmetic: str | None = None,
                            cache: GreedyCache | None = None) -> KnapsackRun:
    inst = coerce(inst, arithmetic)
    if not isinstance(perm, Permutation):
        perm = Permutation(tuple(perm))
    n = inst.num_items
    if len(perm) != n:
        raise ValueError(f"permutation has {len(perm)} entries for {n} items")
    t = default_t(n) if t is None else t
    if not 0 <= t <= n:
        raise ValueError(f"sampling length {t} outside [0, {n}]")
    if cache is None or (cache.inst is not inst and cache.inst != inst):
        cache = GreedyCache(inst)
    exact = inst.is_exact
    zero, one = (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)

    frac = [zero] * n
    rounds = []
    # greedy on Q_t is the "previous" solution of the first assignment round
    prev = cache.solve(perm.order[:t]) if t > 0 else None
    for ell in range(t + 1, n + 1):
        item = perm[ell - 1]
        curr = cache.solve(perm.order[:ell])
        comp = compensation_term(inst, perm, ell, prev, curr, t) if prev is not None else zero
        s = inst.sizes[item]
        raw = curr.fractions[item] - comp / s
        packed = raw
        if not (zero <= raw <= one):
            if exact or raw < -DRIFT_TOL or raw > 1 + DRIFT_TOL:
                raise ClampRequired(f"round {ell}: fraction {raw} outside [0, 1]")
            packed = min(max(raw, zero), one)
        frac[item] = packed
        rounds.append(KnapsackRound(ell, item, curr.fractions[item], comp, raw, packed))
        prev = curr
    value = sum((inst.values[j] * frac[j] for j in range(n)), zero)
    size = sum((inst.sizes[j] * frac[j] for j in range(n)), zero)
    return KnapsackRun(tuple(frac), tuple(rounds), value, size, t)
