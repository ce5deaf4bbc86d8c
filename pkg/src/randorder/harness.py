"""Exact enumeration and Monte Carlo estimation of online-algorithm performance.

Exact mode averages over every arrival order and, for the GAP algorithms,
every bin outcome of every assignment round weighted by its fractional
probability. Monte Carlo mode draws ``(perm, tape)`` per trial from a
counter-based generator keyed by ``(master_seed, trial_index)``, so results
do not depend on how trials are spread over workers.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator

import numpy as np

from . import online_gap, online_knapsack
from .model import (
    GapInstance,
    KnapsackInstance,
    Number,
    Permutation,
    coerce,
    generate_from_spec,
    load_instance,
    save_instance,
)
from .offline import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    LpCache,
    fractional_greedy,
    solve_fractional_gap,
    solve_integral_gap_bruteforce,
)
from .online_gap import RandomTape
from .online_knapsack import GreedyCache

ENUM_BUDGET = 10**7
Z99 = 2.576
MC_SIGMAS = 4

ALGORITHMS = ("infeasible-gap", "feasible-gap", "imitative-gap", "random-gap", "fractional-knapsack")

ASYMPTOTIC = {
    "one_minus_ln2": 1 - math.log(2),
    "half_one_minus_ln2": (1 - math.log(2)) / 2,
    "inverse_e": 1 / math.e,
}


class BadArguments(ValueError):
    pass


# --------------------------------------------------------------------------
# bounds


def harmonic(k: int, exact: bool = True) -> Number:
    if k < 0:
        raise BadArguments(f"harmonic number of negative index {k}")
    if exact:
        return sum((Fraction(1, i) for i in range(1, k + 1)), Fraction(0))
    return math.fsum(1 / i for i in range(1, k + 1))


def lemma3_bound(n: int, t: int, exact: bool = True) -> Number:
    """``2 - 2t/n + H_t - H_n``: guaranteed fraction of OPT for the infeasible run."""
    if not 1 <= t < n:
        raise BadArguments(f"need 1 <= t < n, got n={n}, t={t}")
    if exact:
        return 2 - Fraction(2 * t, n) + harmonic(t) - harmonic(n)
    return 2 - 2 * t / n - math.fsum(1 / i for i in range(t + 1, n + 1))


def theorem2_bound(n: int, t: int, exact: bool = True) -> Number:
    """``(t/n) * sum_{l=t+1..n} 1/(l-1)``: guaranteed fraction of the greedy optimum."""
    if not 1 <= t < n:
        raise BadArguments(f"need 1 <= t < n, got n={n}, t={t}")
    if exact:
        return Fraction(t, n) * sum((Fraction(1, l - 1) for l in range(t + 1, n + 1)), Fraction(0))
    return t / n * math.fsum(1 / (l - 1) for l in range(t + 1, n + 1))


def lemma4_bound(n: int, t: int) -> Fraction:
    """Per-item factor ``(1/n) * sum_{l=t+1..n} t/(l-1)``; multiply by the item's greedy fraction."""
    if t == 0:
        return Fraction(0)
    return theorem2_bound(n, t)


# --------------------------------------------------------------------------
# seeds, digests, statistics


def derived_seed(master_seed: int, index: int, stream: int = 0) -> int:
    """Key of trial ``index``; ``stream`` separates auxiliary draws from trials."""
    ss = np.random.SeedSequence([int(master_seed), int(stream), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def trial_rng(master_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Philox stream for one trial; independent of any other trial's stream."""
    return np.random.Generator(np.random.Philox(key=derived_seed(master_seed, index, stream)))


def digest(data) -> str:
    if not isinstance(data, bytes):
        data = ",".join(map(str, data)).encode()
    return hashlib.sha256(data).hexdigest()[:16]


def instance_digest(inst) -> str:
    return digest(save_instance(inst))


@dataclass(frozen=True)
class Stats:
    mean: float
    stderr: float | None  # None for a single trial
    count: int

    @property
    def ci99(self) -> tuple | None:
        if self.stderr is None:
            return None
        h = Z99 * self.stderr
        return (self.mean - h, self.mean + h)

    @classmethod
    def of(cls, xs) -> "Stats":
        xs = [float(x) for x in xs]
        n = len(xs)
        if n == 0:
            raise BadArguments("no samples")
        mean = math.fsum(xs) / n
        if n == 1:
            return cls(mean, None, 1)
        var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
        return cls(mean, math.sqrt(var / n), n)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "trials": self.count,
                "ci99": list(self.ci99) if self.ci99 else None}


@dataclass(frozen=True)
class TrialOutcome:
    index: int
    seed: int
    perm_digest: str
    value: float
    opt: float
    ratio: float | None


# --------------------------------------------------------------------------
# optimum


@dataclass(frozen=True)
class Optimum:
    value: Number
    source: str  # "bruteforce", "lp-upper-bound" or "fractional-greedy"
    conservative: bool  # True when value only bounds OPT from above


def _as_gap(inst) -> GapInstance:
    return inst.as_gap() if isinstance(inst, KnapsackInstance) else inst


def optimum(inst, algorithm: str, budget: int = DEFAULT_BUDGET) -> Optimum:
    """Comparator for ratios: the integral optimum for GAP algorithms, the
    fractional greedy optimum for the fractional knapsack algorithm."""
    if algorithm == "fractional-knapsack":
        if not isinstance(inst, KnapsackInstance):
            raise BadArguments("fractional-knapsack needs a knapsack instance")
        return Optimum(fractional_greedy(inst).objective, "fractional-greedy", False)
    gap = _as_gap(inst)
    try:
        _, value = solve_integral_gap_bruteforce(gap, budget)
        return Optimum(value, "bruteforce", False)
    except BudgetExceeded:
        return Optimum(solve_fractional_gap(gap).objective, "lp-upper-bound", True)


# --------------------------------------------------------------------------
# exact enumeration


def _check_budget(states: int, budget: int):
    if states > budget:
        raise BudgetExceeded(states, budget)


def tape_outcomes(inst: GapInstance, perm: Permutation, t: int,
                  cache: LpCache) -> Iterator[tuple[RandomTape, Number]]:
    """Every distinct bin outcome of the assignment rounds, as a representative
    tape (bracket midpoints) with its probability."""
    exact = inst.is_exact
    one = Fraction(1) if exact else 1.0
    per_round = []
    for ell in range(t + 1, inst.num_items + 1):
        item = perm[ell - 1]
        row = cache.solve(perm.order[:ell]).primal.column(item)
        opts, lo = [], 0 * one
        for x in row:
            if x > 0:
                opts.append(((lo + min(lo + x, one)) / 2, x))
            lo += x
        rest = one - lo
        if rest > 0:
            opts.append(((lo + one) / 2, rest))
        per_round.append(opts)
    for combo in itertools.product(*per_round):
        weight = one
        for _, p in combo:
            weight *= p
        yield RandomTape(tuple(d for d, _ in combo)), weight


def enumerate_gap(inst: GapInstance, t: int | None = None,
                  budget: int = ENUM_BUDGET) -> Iterator[tuple[Permutation, RandomTape, Number, LpCache]]:
    """All ``(perm, tape, probability)`` triples with positive probability."""
    n, m = inst.num_items, inst.num_bins
    t = online_gap.default_t(n) if t is None else t
    _check_budget(math.factorial(n) * (m + 1) ** (n - t), budget)
    cache = LpCache(inst)
    exact = inst.is_exact
    p_perm = Fraction(1, math.factorial(n)) if exact else 1 / math.factorial(n)
    for order in itertools.permutations(range(n)):
        perm = Permutation(order)
        for tape, w in tape_outcomes(inst, perm, t, cache):
            yield perm, tape, p_perm * w, cache


def exact_expectation_gap(inst, algorithm: str, t: int | None = None,
                          budget: int = ENUM_BUDGET, arithmetic: str | None = None) -> Number:
    inst = coerce(_as_gap(inst), arithmetic)
    if algorithm not in online_gap.GAP_ALGORITHMS:
        raise BadArguments(f"unknown GAP algorithm {algorithm!r}")
    zero = Fraction(0) if inst.is_exact else 0.0
    total = zero
    for perm, tape, w, cache in enumerate_gap(inst, t, budget):
        if algorithm == "random-gap":
            for coin in (0.25, 0.75):
                run = online_gap.run_random_gap(inst, perm, RandomTape(tape.draws, coin), t=t, cache=cache)
                total += w * run.value / 2
        else:
            run = online_gap.GAP_ALGORITHMS[algorithm](inst, perm, tape, t=t, cache=cache)
            total += w * run.value
    return total


@dataclass(frozen=True)
class KnapsackExpectation:
    value: Number
    per_item: tuple


def exact_expectation_knapsack(inst: KnapsackInstance, t: int | None = None,
                               budget: int = math.factorial(8),
                               arithmetic: str | None = None) -> KnapsackExpectation:
    inst = coerce(inst, arithmetic)
    n = inst.num_items
    _check_budget(math.factorial(n), budget)
    cache = GreedyCache(inst)
    zero = Fraction(0) if inst.is_exact else 0.0
    value, per_item = zero, [zero] * n
    for order in itertools.permutations(range(n)):
        run = online_knapsack.run_fractional_knapsack(inst, Permutation(order), t=t, cache=cache)
        value += run.value
        for j in range(n):
            per_item[j] += run.fractions[j]
    k = math.factorial(n)
    return KnapsackExpectation(value / k, tuple(x / k for x in per_item))


# --------------------------------------------------------------------------
# Monte Carlo


def sample_trial(inst, algorithm: str, master_seed: int, index: int, t: int | None):
    """Draw the arrival order and tape of one trial."""
    rng = trial_rng(master_seed, index)
    n = inst.num_items
    perm = Permutation(tuple(int(k) for k in rng.permutation(n)))
    tape = None
    if algorithm != "fractional-knapsack":
        t_ = online_gap.default_t(n) if t is None else t
        tape = RandomTape.sample(rng, n - t_)
    return perm, tape


def run_algorithm(inst, algorithm: str, perm, tape, t, cache):
    if algorithm == "fractional-knapsack":
        return online_knapsack.run_fractional_knapsack(inst, perm, t=t, cache=cache)
    return online_gap.GAP_ALGORITHMS[algorithm](inst, perm, tape, t=t, cache=cache)


def _mc_chunk(args) -> list[tuple]:
    inst, algorithm, master_seed, indices, t = args
    cache = GreedyCache(inst) if algorithm == "fractional-knapsack" else LpCache(inst)
    out = []
    for i in indices:
        perm, tape = sample_trial(inst, algorithm, master_seed, i, t)
        run = run_algorithm(inst, algorithm, perm, tape, t, cache)
        out.append((i, derived_seed(master_seed, i), digest(perm.order), run.value))
    return out


@dataclass
class MonteCarloResult:
    value: Stats
    ratio: Stats | None
    optimum: Optimum
    outcomes: list = field(default_factory=list)


def mc_estimate(inst, algorithm: str, trials: int, master_seed: int, t: int | None = None,
                arithmetic: str | None = None, workers: int = 1,
                budget: int = DEFAULT_BUDGET, opt: Optimum | None = None) -> MonteCarloResult:
    if trials < 1:
        raise BadArguments("trials must be >= 1")
    if algorithm not in ALGORITHMS:
        raise BadArguments(f"unknown algorithm {algorithm!r}")
    inst = coerce(inst, arithmetic)
    if algorithm != "fractional-knapsack":
        inst = _as_gap(inst)
    opt = opt or optimum(inst, algorithm, budget)
    indices = list(range(trials))
    if workers <= 1:
        rows = _mc_chunk((inst, algorithm, master_seed, indices, t))
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_mc_chunk, [(inst, algorithm, master_seed, c, t) for c in chunks])
            rows = [r for part in parts for r in part]
        rows.sort(key=lambda r: r[0])
    outcomes = []
    for i, seed, pd, value in rows:
        ratio = float(value / opt.value) if opt.value > 0 else None
        outcomes.append(TrialOutcome(i, seed, pd, float(value), float(opt.value), ratio))
    value_stats = Stats.of(o.value for o in outcomes)
    ratio_stats = Stats.of(o.ratio for o in outcomes) if opt.value > 0 else None
    return MonteCarloResult(value_stats, ratio_stats, opt, outcomes)


# --------------------------------------------------------------------------
# overflow frequency of a single bin


@dataclass(frozen=True)
class Lemma2Report:
    round: int
    bin: int
    t: int
    bound: float
    frequency: float
    stderr: float
    trials: int
    sample_set: tuple

    @property
    def passed(self) -> bool:
        return self.frequency <= self.bound + MC_SIGMAS * self.stderr


def verify_lemma2(inst, ell: int, bin: int, trials: int, master_seed: int,
                  t: int | None = None) -> Lemma2Report:
    """Empirical probability that the tentative loads of rounds ``t+1..ell-1``
    overflow ``bin``, for one random set of the first ``ell - 1`` items."""
    inst = _as_gap(inst)
    n = inst.num_items
    t = online_gap.default_t(n) if t is None else t
    if not t < ell <= n:
        raise BadArguments(f"need t < ell <= n, got t={t}, ell={ell}, n={n}")
    if not 0 <= bin < inst.num_bins:
        raise BadArguments(f"bin {bin} out of range")
    if trials < 1:
        raise BadArguments("trials must be >= 1")
    rng = trial_rng(master_seed, 0, stream=1)
    sample = tuple(sorted(int(j) for j in rng.choice(n, size=ell - 1, replace=False)))
    bound = math.fsum(1 / k for k in range(t + 1, ell))
    cache = LpCache(inst)
    cap = inst.capacities[bin]
    hits = 0
    for i in range(trials):
        r = trial_rng(master_seed, i)
        order = [sample[k] for k in r.permutation(len(sample))]
        draws = r.random(max(ell - 1 - t, 0))
        load = 0 * cap
        for k in range(t + 1, ell):
            item = order[k - 1]
            row = cache.solve(order[:k]).primal.column(item)
            if online_gap.select_bin(row, float(draws[k - t - 1])) == bin:
                load += inst.sizes[bin][item]
        if not online_gap.fits(load, cap):
            hits += 1
    p = hits / trials
    stderr = math.sqrt(p * (1 - p) / trials)
    return Lemma2Report(ell, bin, t, bound, p, stderr, trials, sample)


# --------------------------------------------------------------------------
# experiments and reports


@dataclass
class ExperimentConfig:
    instance: str  # path to an instance file or a generator spec
    algorithm: str
    mode: str = "mc"
    trials: int = 1000
    seed: int = 0
    t: int | None = None
    arithmetic: str | None = None
    budget: int = DEFAULT_BUDGET
    workers: int = 1

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise BadArguments(f"algorithm must be one of {ALGORITHMS}")
        if self.mode not in ("exact", "mc"):
            raise BadArguments("mode must be 'exact' or 'mc'")
        if self.mode == "mc" and self.trials < 1:
            raise BadArguments("trials must be >= 1")
        if self.arithmetic not in (None, "float", "rational"):
            raise BadArguments("arithmetic must be 'float' or 'rational'")
        if not 0 <= self.seed < 2**64:
            raise BadArguments("seed must be a 64-bit unsigned integer")

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("workers")  # never affects results
        return d


def resolve_instance(source: str, seed: int = 0):
    """Load ``source`` as a file if it exists, else treat it as a generator spec."""
    p = Path(source)
    if p.is_file():
        return load_instance(p.read_bytes())
    return generate_from_spec(source, seed)


def _num(x) -> float:
    return float(x)


def _exact_str(x) -> str | None:
    return f"{x.numerator}/{x.denominator}" if isinstance(x, Fraction) else None


def _bound_entry(bound: Number, achieved: Number | None, opt: Number,
                 slack: float = 0.0) -> dict:
    entry = {"value": _num(bound), "exact": _exact_str(bound)}
    if achieved is None or opt <= 0:
        entry.update(passed=None, margin=None)
        return entry
    margin = achieved - bound * opt
    entry.update(passed=bool(margin + slack >= 0), margin=_num(margin))
    return entry


def _bounds(algorithm: str, n: int, t: int, achieved, opt: Number, slack: float = 0.0) -> dict:
    bounds = {name: {"value": v, "passed": None, "margin": None} for name, v in ASYMPTOTIC.items()}
    if algorithm == "fractional-knapsack":
        if 1 <= t < n:
            bounds["theorem2"] = _bound_entry(theorem2_bound(n, t), achieved, opt, slack)
    elif 1 <= t < n:
        b = lemma3_bound(n, t)
        if algorithm == "infeasible-gap":
            bounds["lemma3"] = _bound_entry(b, achieved, opt, slack)
        elif algorithm == "random-gap":
            bounds["half_lemma3"] = _bound_entry(b / 2, achieved, opt, slack)
        else:
            bounds["lemma3"] = _bound_entry(b, None, opt)
    return bounds


def run_experiment(config: ExperimentConfig, lemma_checks: bool = True) -> dict:
    """Run one experiment; the report is a pure function of ``config``."""
    from . import checks  # local import: checks builds on this module

    config.validate()
    inst = coerce(resolve_instance(config.instance, config.seed), config.arithmetic)
    algo = config.algorithm
    if algo == "fractional-knapsack" and not isinstance(inst, KnapsackInstance):
        raise BadArguments("fractional-knapsack needs a knapsack instance")
    n = inst.num_items
    if algo == "fractional-knapsack":
        t = online_knapsack.default_t(n) if config.t is None else config.t
    else:
        t = online_gap.default_t(n) if config.t is None else config.t
    if config.t is not None and not 1 <= config.t <= n - 1:
        raise BadArguments(f"t must lie in [1, {n - 1}]")
    opt = optimum(inst, algo, config.budget)
    report: dict = {
        "config": config.echo(),
        "instance": {"digest": instance_digest(inst), "kind": type(inst).__name__,
                     "num_items": n, "num_bins": getattr(_as_gap(inst), "num_bins", 1),
                     "exact": inst.is_exact},
        "t": t,
        "optimum": {"value": _num(opt.value), "exact": _exact_str(opt.value),
                    "source": opt.source, "conservative_ratio": opt.conservative},
        "lemma_checks": [],
    }
    if config.mode == "exact":
        if algo == "fractional-knapsack":
            ex = exact_expectation_knapsack(inst, t)
            value = ex.value
            report["exact"] = {"expected_value": _num(value), "exact": _exact_str(value),
                               "per_item": [_num(x) for x in ex.per_item]}
            if lemma_checks:
                report["lemma_checks"].append(checks.lemma4_check(inst, t, ex).to_dict())
        else:
            value = exact_expectation_gap(inst, algo, t, config.budget)
            report["exact"] = {"expected_value": _num(value), "exact": _exact_str(value)}
            if lemma_checks:
                report["lemma_checks"].append(checks.coupling_exact(_as_gap(inst), t).to_dict())
        report["exact"]["ratio"] = _num(value / opt.value) if opt.value > 0 else None
        report["bounds"] = _bounds(algo, n, t, value, opt.value)
    else:
        mc = mc_estimate(inst, algo, config.trials, config.seed, t=t,
                         workers=config.workers, budget=config.budget, opt=opt)
        report["mc"] = mc.value.to_dict()
        report["mc"]["ratio"] = mc.ratio.to_dict() if mc.ratio else None
        slack = MC_SIGMAS * (mc.value.stderr or 0.0)
        report["bounds"] = _bounds(algo, n, t, mc.value.mean, float(opt.value), slack)
        report["trials"] = [asdict(o) for o in mc.outcomes]
    return report


def write_report(report: dict, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()
    if fmt != "csv":
        raise BadArguments(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "seed", "perm_digest", "value", "opt", "ratio"])
    for o in report.get("trials", []):
        w.writerow([o["index"], o["seed"], o["perm_digest"], repr(o["value"]), repr(o["opt"]),
                    "" if o["ratio"] is None else repr(o["ratio"])])
    footer = [("algorithm", report["config"]["algorithm"]), ("mode", report["config"]["mode"]),
              ("seed", report["config"]["seed"]), ("t", report["t"]),
              ("optimum", repr(report["optimum"]["value"])),
              ("conservative_ratio", report["optimum"]["conservative_ratio"])]
    if "mc" in report:
        footer += [("mean", repr(report["mc"]["mean"])), ("stderr", repr(report["mc"]["stderr"]))]
    if "exact" in report:
        footer += [("expected_value", repr(report["exact"]["expected_value"]))]
    for name, b in sorted(report["bounds"].items()):
        footer.append((f"bound:{name}", f"{b['value']!r} passed={b['passed']}"))
    for key, val in footer:
        buf.write(f"# {key},{val}\n")
    return buf.getvalue().encode()
