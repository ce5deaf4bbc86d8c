"""Property batteries over randomized corpora.

Each suite returns a :class:`SuiteResult` whose failures carry enough to
replay the counterexample: instance digest (and data), arrival order, tape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import harness, online_gap, online_knapsack
from .model import (
    GapInstance,
    KNAPSACK_FAMILIES,
    GapRanges,
    KnapsackInstance,
    Permutation,
    check_feasibility,
    gen_knapsack_family,
    gen_uniform_gap,
    gen_unit_iid,
    save_instance,
    value_of,
)
from .offline import LpCache, fractional_greedy, solve_integral_gap_bruteforce
from .online_gap import RandomTape
from .online_knapsack import GreedyCache

MAX_FAILURES = 20

SUITES = ("feasibility", "coupling", "eq1", "lemma2", "lemma4")


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    failures: list = field(default_factory=list)
    failure_count: int = 0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failure_count == 0

    def fail(self, **info):
        self.failure_count += 1
        if len(self.failures) < MAX_FAILURES:
            self.failures.append(info)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "checked": self.checked,
                "failure_count": self.failure_count, "failures": self.failures,
                "details": self.details}


# --------------------------------------------------------------------------
# corpora


def _rng(seed, *salt):
    return harness.trial_rng(seed, 0, stream=1 + sum(s * 7919**k for k, s in enumerate(salt)))


def gap_corpus(count: int, seed: int, n_values=range(2, 8), m_values=(1, 2, 3)) -> list[GapInstance]:
    """Mixed GAP instances: loose and tight uniform data, knapsack families
    and unit-size i.i.d. values (the last two as single-bin instances)."""
    rng = _rng(seed)
    out = []
    n_values, m_values = list(n_values), list(m_values)
    for k in range(count):
        n = int(rng.choice(n_values))
        m = int(rng.choice(m_values))
        s = int(rng.integers(2**32))
        family = k % 5
        if family == 0:
            out.append(gen_uniform_gap(n, m, s))
        elif family == 1:
            # sizes comparable to capacities: frequent overflows
            out.append(gen_uniform_gap(n, m, s, GapRanges(values=(0, 9), sizes=(3, 8), capacities=(8, 12))))
        elif family == 2:
            out.append(gen_uniform_gap(n, m, s, GapRanges(values=(1, 3), sizes=(1, 4), capacities=(4, 6))))
        elif family == 3:
            fam = KNAPSACK_FAMILIES[k // 5 % len(KNAPSACK_FAMILIES)]
            out.append(gen_knapsack_family(fam, n, s, {"R": 12}).as_gap())
        else:
            out.append(gen_unit_iid(n, "uniform:1,2,3,5", s).as_gap())
    return out


def knapsack_corpus(count: int, seed: int, n_values=range(3, 8)) -> list[KnapsackInstance]:
    rng = _rng(seed, 1)
    out = []
    n_values = list(n_values)
    for k in range(count):
        n = int(rng.choice(n_values))
        s = int(rng.integers(2**32))
        if k % 5 == 4:
            out.append(gen_unit_iid(n, "uniform:1,2,4,7", s))
        else:
            fam = KNAPSACK_FAMILIES[k % 5]
            ratio = Fraction(int(rng.integers(2, 8)), 10)
            out.append(gen_knapsack_family(fam, n, s, {"R": 20, "capacity_ratio": ratio}))
    return out


def gap_triples(trials: int, seed: int, corpus_size: int = 400):
    """``(inst, cache, perm, tape)`` samples spread evenly over a corpus."""
    corpus = gap_corpus(corpus_size, seed)
    caches = [LpCache(inst) for inst in corpus]
    for i in range(trials):
        k = i % len(corpus)
        inst = corpus[k]
        rng = harness.trial_rng(seed, i)
        n = inst.num_items
        perm = Permutation(tuple(int(x) for x in rng.permutation(n)))
        tape = RandomTape.sample(rng, n - online_gap.default_t(n))
        yield inst, caches[k], perm, tape


def _where(inst, perm, tape=None) -> dict:
    info = {"instance": harness.instance_digest(inst), "data": save_instance(inst).decode(),
            "perm": list(perm.order)}
    if tape is not None:
        info["tape"] = [float(d) for d in tape.draws]
        info["coin"] = float(tape.coin)
    return info


# --------------------------------------------------------------------------
# single-triple checks


def feasibility_violations(inst, perm, tape, cache) -> list[str]:
    bad = []
    for name in ("feasible-gap", "imitative-gap", "random-gap"):
        run = online_gap.GAP_ALGORITHMS[name](inst, perm, tape, cache=cache)
        if not check_feasibility(run.assignment, inst).feasible:
            bad.append(f"{name} output infeasible")
    x = online_gap.run_infeasible_gap(inst, perm, tape, cache=cache)
    rep = check_feasibility(x.assignment, inst, order=perm.order)
    if not all(rep.satisfies_c2):
        bad.append("infeasible-gap assigns an item twice")
    for i in range(inst.num_bins):
        if len(rep.overflow_items[i]) > 1:
            bad.append(f"infeasible-gap bin {i} overflows on more than one item")
        if rep.overflow_items[i]:
            last = [r for r in x.trace if r.accepted and r.bin == i][-1]
            if not online_gap.fits(last.load_before, inst.capacities[i]):
                bad.append(f"infeasible-gap bin {i} still overflows without its last item")
    return bad


def coupling_violations(inst, perm, tape, cache) -> list[str]:
    """Pointwise coupling plus the per-bin structure behind it."""
    x = online_gap.run_infeasible_gap(inst, perm, tape, cache=cache)
    y = online_gap.run_feasible_gap(inst, perm, tape, cache=cache)
    z = online_gap.run_imitative_gap(inst, perm, tape, cache=cache)
    bad = []
    if value_of(y.assignment, inst) + value_of(z.assignment, inst) < value_of(x.assignment, inst):
        bad.append("v(y) + v(z) < v(x)")
    if z.imitative != y.assignment:
        bad.append("imitative assignment differs from the feasible run")
    for coin in (0.25, 0.75):
        r = online_gap.run_random_gap(inst, perm, RandomTape(tape.draws, coin), cache=cache)
        expect = y if coin < 0.5 else z
        if r.assignment != expect.assignment:
            bad.append(f"random-gap with coin {coin} does not match its branch")
    for i in range(inst.num_bins):
        x_rounds = [r for r in x.trace if r.accepted and r.bin == i]
        star = next((r for r in x_rounds if not online_gap.fits(r.load_after, inst.capacities[i])), None)
        cutoff = star.round if star else inst.num_items + 1
        y_items = {r.item for r in y.trace if r.accepted and r.bin == i and r.round < cutoff}
        x_items = {r.item for r in x_rounds if r.round < cutoff}
        if x_items != y_items:
            bad.append(f"bin {i}: feasible run departs from infeasible run before its overflow")
        z_items = set(z.assignment.items_in(i))
        if z_items != ({star.item} if star else set()):
            bad.append(f"bin {i}: imitative item is not the infeasible run's overflow item")
        if star and any(r.round > star.round for r in x_rounds):
            bad.append(f"bin {i}: infeasible run accepted after overflowing")
    return bad


# --------------------------------------------------------------------------
# suites


def feasibility_suite(trials: int, seed: int) -> SuiteResult:
    res = SuiteResult("feasibility")
    for inst, cache, perm, tape in gap_triples(trials, seed):
        res.checked += 1
        for msg in feasibility_violations(inst, perm, tape, cache):
            res.fail(reason=msg, **_where(inst, perm, tape))
    return res


def coupling_suite(trials: int, seed: int) -> SuiteResult:
    res = SuiteResult("coupling")
    for inst, cache, perm, tape in gap_triples(trials, seed):
        res.checked += 1
        for msg in coupling_violations(inst, perm, tape, cache):
            res.fail(reason=msg, **_where(inst, perm, tape))
    return res


def coupling_exact(inst: GapInstance, t: int | None = None,
                   budget: int = harness.ENUM_BUDGET) -> SuiteResult:
    """Coupling over every positive-probability ``(perm, tape)``; also records
    the exact expectations of the three runs."""
    res = SuiteResult("coupling-exact")
    zero = Fraction(0) if inst.is_exact else 0.0
    ex = {"x": zero, "y": zero, "z": zero}
    for perm, tape, w, cache in harness.enumerate_gap(inst, t, budget):
        res.checked += 1
        x = online_gap.run_infeasible_gap(inst, perm, tape, t=t, cache=cache).value
        y = online_gap.run_feasible_gap(inst, perm, tape, t=t, cache=cache).value
        z = online_gap.run_imitative_gap(inst, perm, tape, t=t, cache=cache).value
        ex["x"] += w * x
        ex["y"] += w * y
        ex["z"] += w * z
        if y + z < x:
            res.fail(reason="v(y) + v(z) < v(x)", **_where(inst, perm, tape))
    if ex["y"] + ex["z"] < ex["x"]:
        res.fail(reason="E[v(y)] + E[v(z)] < E[v(x)]", instance=harness.instance_digest(inst))
    res.details = {k: str(v) for k, v in ex.items()}
    return res


def lemma3_check(inst: GapInstance, t: int | None = None) -> SuiteResult:
    """Exact expected infeasible value against the finite-n guarantee."""
    res = SuiteResult("lemma3")
    n = inst.num_items
    t = online_gap.default_t(n) if t is None else t
    _, opt = solve_integral_gap_bruteforce(inst)
    bound = harness.lemma3_bound(n, t)
    ex = harness.exact_expectation_gap(inst, "infeasible-gap", t)
    rnd = harness.exact_expectation_gap(inst, "random-gap", t)
    res.checked = 2
    if ex < bound * opt:
        res.fail(reason="E[v(x)] below the finite-n bound", instance=harness.instance_digest(inst))
    if rnd < bound * opt / 2:
        res.fail(reason="E[v(random)] below half the finite-n bound", instance=harness.instance_digest(inst))
    res.details = {"n": n, "t": t, "opt": str(opt), "bound": str(bound),
                   "infeasible": str(ex), "random": str(rnd)}
    return res


def eq1_violations(inst: KnapsackInstance, perm: Permutation, cache: GreedyCache,
                   t: int | None = None) -> list[str]:
    n = inst.num_items
    t = online_knapsack.default_t(n) if t is None else t
    bad = []
    prev = None
    for ell in range(1, n + 1):
        curr = cache.solve(perm.order[:ell])
        item = perm[ell - 1]
        if prev is not None:
            for k in range(ell - 1):
                j = perm[k]
                if curr.fractions[j] > prev.fractions[j]:
                    bad.append(f"round {ell}: fraction of item {j} increased")
            if curr.total_size < prev.total_size:
                bad.append(f"round {ell}: greedy total size decreased")
            displaced = online_knapsack.compensation_term(inst, perm, ell, prev, curr, t, start=1)
            if inst.sizes[item] * curr.fractions[item] < displaced:
                bad.append(f"round {ell}: displacement exceeds the new item's packed size")
        prev = curr
    try:
        run = online_knapsack.run_fractional_knapsack(inst, perm, t=t, cache=cache)
    except online_knapsack.ClampRequired as exc:
        return bad + [f"fraction outside [0, 1]: {exc}"]
    if any(not (0 <= r.raw_fraction <= 1) for r in run.rounds):
        bad.append("pre-clamp fraction outside [0, 1]")
    if run.total_size > inst.capacity:
        bad.append("packed size exceeds capacity")
    full = cache.solve(range(n))
    telescoped = sum((inst.sizes[perm[ell - 1]] * full.fractions[perm[ell - 1]]
                      for ell in range(t + 1, n + 1)), 0 * inst.capacity)
    if inst.is_exact and run.total_size != telescoped:
        bad.append("packed size differs from the telescoped greedy size")
    return bad


def eq1_suite(trials: int, seed: int, corpus_size: int = 400) -> SuiteResult:
    res = SuiteResult("eq1")
    corpus = knapsack_corpus(corpus_size, seed)
    caches = [GreedyCache(inst) for inst in corpus]
    for i in range(trials):
        k = i % len(corpus)
        inst = corpus[k]
        rng = harness.trial_rng(seed, i)
        perm = Permutation(tuple(int(x) for x in rng.permutation(inst.num_items)))
        res.checked += 1
        for msg in eq1_violations(inst, perm, caches[k]):
            res.fail(reason=msg, **_where(inst, perm))
    return res


def lemma4_check(inst: KnapsackInstance, t: int | None = None,
                 ex: harness.KnapsackExpectation | None = None) -> SuiteResult:
    """Exact per-item expectations and total value against their finite-n bounds."""
    res = SuiteResult("lemma4")
    n = inst.num_items
    t = online_knapsack.default_t(n) if t is None else t
    ex = ex or harness.exact_expectation_knapsack(inst, t)
    greedy = fractional_greedy(inst)
    factor = harness.lemma4_bound(n, t)
    for j in range(n):
        res.checked += 1
        if ex.per_item[j] < greedy.fractions[j] * factor:
            res.fail(reason=f"E[x_{j}] below its bound", instance=harness.instance_digest(inst))
    res.checked += 1
    if ex.value < factor * greedy.objective:
        res.fail(reason="E[v(x)] below the finite-n greedy bound", instance=harness.instance_digest(inst))
    res.details = {"n": n, "t": t, "factor": str(factor), "expected_value": str(ex.value),
                   "greedy_value": str(greedy.objective)}
    return res


def lemma4_suite(count: int, seed: int) -> SuiteResult:
    res = SuiteResult("lemma4")
    for inst in knapsack_corpus(count, seed):
        sub = lemma4_check(inst)
        res.checked += sub.checked
        res.failure_count += sub.failure_count
        res.failures.extend(sub.failures[: MAX_FAILURES - len(res.failures)])
    return res


def lemma2_suite(cells: int, trials: int, seed: int) -> SuiteResult:
    """Random ``(instance, round, bin)`` cells with ``trials`` samples each."""
    res = SuiteResult("lemma2")
    rng = _rng(seed, 2)
    corpus = gap_corpus(max(cells, 1), seed, n_values=range(6, 11), m_values=(1, 2, 3))
    reports = []
    for c in range(cells):
        inst = corpus[c]
        n = inst.num_items
        t = online_gap.default_t(n)
        ell = int(rng.integers(min(t + 2, n), n + 1))
        b = int(rng.integers(inst.num_bins))
        rep = harness.verify_lemma2(inst, ell, b, trials, seed + c)
        res.checked += 1
        reports.append({"instance": harness.instance_digest(inst), "round": ell, "bin": b,
                        "bound": rep.bound, "frequency": rep.frequency, "stderr": rep.stderr})
        if not rep.passed:
            res.fail(reason="overflow frequency above bound", **reports[-1])
    res.details = {"cells": reports}
    return res


def run_suite(name: str, trials: int, seed: int) -> SuiteResult:
    if name == "feasibility":
        return feasibility_suite(trials, seed)
    if name == "coupling":
        return coupling_suite(trials, seed)
    if name == "eq1":
        return eq1_suite(trials, seed)
    if name == "lemma4":
        return lemma4_suite(max(1, min(trials, 200)), seed)
    if name == "lemma2":
        return lemma2_suite(4, trials, seed)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
