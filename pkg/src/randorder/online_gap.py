"""Online GAP algorithms driven by an explicit arrival order and random tape.

All four algorithms share the same round structure: the first ``t`` items are
only observed; afterwards each round solves the fractional relaxation on the
revealed items and draws a bin for the new item from its fractional column.
They differ only in when the drawn bin actually receives the item:

* ``infeasible`` accepts if the bin's load *before* the item is within capacity,
* ``feasible`` accepts if the load *after* adding the item is within capacity,
* ``imitative`` tracks the feasible run and keeps, per bin, the first item the
  feasible run had to reject,
* ``random`` runs ``feasible`` or ``imitative`` on a fair coin.

Randomness comes from a :class:`RandomTape`, so the same ``(perm, tape)`` pair
can be fed to every algorithm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .model import Assignment, GapInstance, Number, Permutation, coerce
from .offline import LpCache

ROW_TOL = 1e-9
CAPACITY_RTOL = 1e-9


class RowSumExceedsOne(ValueError):
    pass


@dataclass(frozen=True)
class RandomTape:
    """One uniform draw per assignment round plus the coin of RandomGAP."""

    draws: tuple
    coin: float = 0.0

    def __post_init__(self):
        draws = tuple(self.draws)
        for d in (*draws, self.coin):
            if not 0 <= d < 1:
                raise ValueError(f"tape entry {d} outside [0, 1)")
        object.__setattr__(self, "draws", draws)

    def __len__(self) -> int:
        return len(self.draws)

    @classmethod
    def sample(cls, rng: np.random.Generator, length: int) -> "RandomTape":
        draws = rng.random(length)
        return cls(tuple(float(d) for d in draws), float(rng.random()))


def default_t(n: int) -> int:
    return n // 2


def select_bin(row: Sequence[Number], draw: Number) -> int | None:
    """Inverse-CDF bin choice: bin ``i`` iff ``sum(row[:i]) <= draw < sum(row[:i+1])``.

    Returns ``None`` when the draw falls in the residual mass ``1 - sum(row)``.
    """
    total = sum(row)
    if any(x < 0 for x in row):
        raise ValueError("fractional row has a negative entry")
    if total > 1 and not (isinstance(total, float) and total <= 1 + ROW_TOL):
        raise RowSumExceedsOne(f"row sums to {total}")
    cum = 0
    last = len(row) - 1
    for i, x in enumerate(row):
        cum += x
        if i == last and isinstance(cum, float) and cum > 1:
            cum = 1.0
        if draw < cum:
            return i
    return None


# --------------------------------------------------------------------------
# run records


@dataclass(frozen=True)
class RoundTrace:
    round: int  # 1-based
    item: int
    row: tuple  # fractional column of the item in the relaxation on Q_round
    bin: int | None
    tentative_value: Number
    accepted: bool
    load_before: Number | None
    load_after: Number | None


@dataclass(frozen=True)
class GapRun:
    algorithm: str
    assignment: Assignment
    trace: tuple
    value: Number
    imitative: Assignment | None = None
    t: int = 0

    def bins(self) -> list:
        return [self.assignment.bin_of(j) for j in range(self.assignment.shape[1])]

    def to_records(self) -> list[dict]:
        return [
            {
                "round": r.round,
                "item": r.item,
                "row": [str(x) for x in r.row],
                "bin": r.bin,
                "tentative_value": str(r.tentative_value),
                "accepted": r.accepted,
                "load_before": None if r.load_before is None else str(r.load_before),
                "load_after": None if r.load_after is None else str(r.load_after),
            }
            for r in self.trace
        ]


# --------------------------------------------------------------------------
# shared round structure


def fits(load, cap) -> bool:
    if isinstance(load, float) or isinstance(cap, float):
        return load <= cap + CAPACITY_RTOL * cap
    return load <= cap


def _prepare(inst, perm, tape, t, arithmetic, cache):
    inst = coerce(inst, arithmetic)
    if not isinstance(perm, Permutation):
        perm = Permutation(tuple(perm))
    n = inst.num_items
    if len(perm) != n:
        raise ValueError(f"permutation has {len(perm)} entries for {n} items")
    t = default_t(n) if t is None else t
    if not 0 <= t <= n:
        raise ValueError(f"sampling length {t} outside [0, {n}]")
    if len(tape) != n - t:
        raise ValueError(f"tape has {len(tape)} draws, need {n - t}")
    if cache is None or (cache.inst is not inst and cache.inst != inst):
        cache = LpCache(inst)
    return inst, perm, t, cache


def decisions(inst: GapInstance, perm: Permutation, tape: RandomTape, t: int,
              cache: LpCache) -> Iterator[tuple[int, int, tuple, int | None]]:
    """Yield ``(round, item, row, bin)`` for the assignment rounds ``t+1..n``.

    A draw is consumed in every such round, whatever the algorithm does with it.
    """
    n, m = inst.num_items, inst.num_bins
    for ell in range(t + 1, n + 1):
        item = perm[ell - 1]
        sol = cache.solve(perm.order[:ell])
        row = tuple(sol.primal.entries[i][item] for i in range(m))
        yield ell, item, row, select_bin(row, tape.draws[ell - t - 1])


def _zero(inst):
    return Fraction(0) if inst.is_exact else 0.0


def _finish(name, inst, bins, trace, t, imitative=None) -> GapRun:
    assignment = Assignment.from_bins(bins, inst.num_bins)
    value = sum((r.tentative_value for r in trace if r.accepted and r.bin is not None), _zero(inst))
    return GapRun(name, assignment, tuple(trace), value, imitative, t)


def _threshold_run(name, inst, perm, tape, t, cache, after: bool) -> GapRun:
    loads = [_zero(inst)] * inst.num_bins
    bins: list = [None] * inst.num_items
    trace = []
    for ell, item, row, i in decisions(inst, perm, tape, t, cache):
        if i is None:
            trace.append(RoundTrace(ell, item, row, None, _zero(inst), False, None, None))
            continue
        before = loads[i]
        size = inst.sizes[i][item]
        ok = fits(before + size, inst.capacities[i]) if after else fits(before, inst.capacities[i])
        if ok:
            loads[i] = before + size
            bins[item] = i
        trace.append(RoundTrace(ell, item, row, i, inst.values[i][item], ok, before, loads[i]))
    return _finish(name, inst, bins, trace, t)


# --------------------------------------------------------------------------
# algorithms


def run_infeasible_gap(inst: GapInstance, perm, tape: RandomTape, t: int | None = None,
                       arithmetic: str | None = None, cache: LpCache | None = None) -> GapRun:
    """Accept the drawn bin whenever its load from earlier rounds is within capacity.

    The output may overflow each bin by its last accepted item.
    """
    inst, perm, t, cache = _prepare(inst, perm, tape, t, arithmetic, cache)
    return _threshold_run("infeasible-gap", inst, perm, tape, t, cache, after=False)


def run_feasible_gap(inst: GapInstance, perm, tape: RandomTape, t: int | None = None,
                     arithmetic: str | None = None, cache: LpCache | None = None) -> GapRun:
    """Accept the drawn bin only if the item still fits."""
    inst, perm, t, cache = _prepare(inst, perm, tape, t, arithmetic, cache)
    return _threshold_run("feasible-gap", inst, perm, tape, t, cache, after=True)


def run_imitative_gap(inst: GapInstance, perm, tape: RandomTape, t: int | None = None,
                      arithmetic: str | None = None, cache: LpCache | None = None) -> GapRun:
    """Keep, per bin, the first item that the feasible run could not fit.

    The feasible run is carried along as the imitative assignment and exposed
    as ``GapRun.imitative``.
    """
    inst, perm, t, cache = _prepare(inst, perm, tape, t, arithmetic, cache)
    y_loads = [_zero(inst)] * inst.num_bins
    y_bins: list = [None] * inst.num_items
    z_bins: list = [None] * inst.num_items
    z_used = [False] * inst.num_bins
    trace = []
    for ell, item, row, i in decisions(inst, perm, tape, t, cache):
        if i is None:
            trace.append(RoundTrace(ell, item, row, None, _zero(inst), False, None, None))
            continue
        size = inst.sizes[i][item]
        accepted = False
        before = _zero(inst) if not z_used[i] else inst.sizes[i][z_bins.index(i)]
        if fits(y_loads[i] + size, inst.capacities[i]):
            y_loads[i] += size
            y_bins[item] = i
        elif not z_used[i]:
            # the item overflows the imitative assignment: the actual one takes it
            z_used[i] = True
            z_bins[item] = i
            accepted = True
        after = size if accepted else before
        trace.append(RoundTrace(ell, item, row, i, inst.values[i][item], accepted, before, after))
    y = Assignment.from_bins(y_bins, inst.num_bins)
    return _finish("imitative-gap", inst, z_bins, trace, t, imitative=y)


def run_random_gap(inst: GapInstance, perm, tape: RandomTape, t: int | None = None,
                   arithmetic: str | None = None, cache: LpCache | None = None) -> GapRun:
    """Feasible run if ``tape.coin < 1/2``, else the imitative run, on the same tape."""
    runner = run_feasible_gap if tape.coin < 0.5 else run_imitative_gap
    run = runner(inst, perm, tape, t=t, arithmetic=arithmetic, cache=cache)
    return GapRun("random-gap", run.assignment, run.trace, run.value, run.imitative, run.t)


GAP_ALGORITHMS = {
    "infeasible-gap": run_infeasible_gap,
    "feasible-gap": run_feasible_gap,
    "imitative-gap": run_imitative_gap,
    "random-gap": run_random_gap,
}
