"""Offline solvers: fractional greedy knapsack, the fractional GAP relaxation,
and exhaustive integral optima used as ground truth."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .model import (
    FLOAT_TOL,
    Assignment,
    DimensionMismatch,
    FractionalAssignment,
    GapInstance,
    KnapsackInstance,
    Number,
    leq,
)
from .simplex import NumericalFailure, solve_tableau

DEFAULT_BUDGET = 10**8

__all__ = [
    "BudgetExceeded",
    "GreedySolution",
    "LpCache",
    "LpSolution",
    "NumericalFailure",
    "OptimalityReport",
    "fractional_greedy",
    "solve_fractional_gap",
    "solve_integral_gap_bnb",
    "solve_integral_gap_bruteforce",
    "solve_integral_knapsack_bruteforce",
    "verify_lp_optimality",
]


class BudgetExceeded(RuntimeError):
    def __init__(self, needed: int, budget: int):
        super().__init__(f"enumeration needs {needed} states, budget is {budget}")
        self.needed = needed
        self.budget = budget


def _zero(exact: bool):
    return Fraction(0) if exact else 0.0


# --------------------------------------------------------------------------
# fractional knapsack


@dataclass(frozen=True)
class GreedySolution:
    """Fractional greedy packing of a set of items.

    ``fractions[j]`` is the packed fraction of item ``j`` (zero outside the
    item set), ``density_order`` the item set sorted by density, ties by
    index, and ``rho`` the number of items packed completely.
    """

    fractions: tuple
    rho: int
    density_order: tuple
    objective: Number
    total_size: Number

    @property
    def assignment(self) -> FractionalAssignment:
        return FractionalAssignment((self.fractions,))


def fractional_greedy(inst: KnapsackInstance, items: Iterable[int] | None = None) -> GreedySolution:
    n = inst.num_items
    items = range(n) if items is None else items
    order = tuple(sorted(items, key=lambda j: (-inst.density(j), j)))
    exact = inst.is_exact
    frac = [_zero(exact)] * n
    used = _zero(exact)
    value = _zero(exact)
    rho = 0
    for j in order:
        s = inst.sizes[j]
        if used + s <= inst.capacity:
            frac[j] = Fraction(1) if exact else 1.0
            used += s
            value += inst.values[j]
            rho += 1
            continue
        rest = inst.capacity - used
        if rest > 0:
            frac[j] = rest / s
            used += rest
            value += inst.values[j] * frac[j]
        break
    return GreedySolution(tuple(frac), rho, order, value, used)


# --------------------------------------------------------------------------
# fractional GAP relaxation


@dataclass(frozen=True)
class LpSolution:
    """Optimal vertex of the relaxation restricted to ``subset``.

    ``bin_prices`` and ``item_prices`` are the optimal duals of the capacity
    and one-bin-per-item rows; items outside the subset carry price zero.
    """

    primal: FractionalAssignment
    objective: Number
    bin_prices: tuple
    item_prices: tuple
    basis_signature: tuple
    subset: tuple


def solve_fractional_gap(inst: GapInstance, item_subset: Iterable[int] | None = None) -> LpSolution:
    """Solve max v.x over (C1), (C2), x >= 0 on the columns in ``item_subset``.

    Variables are ordered bin-major (bin 0's items, then bin 1's, ...) followed
    by the slacks of the bin rows and the item rows; Bland's rule on this
    order makes the returned vertex a function of the inputs alone.
    Arithmetic follows the data: exact instances are solved exactly.
    """
    m, n = inst.num_bins, inst.num_items
    subset = tuple(sorted(set(range(n) if item_subset is None else item_subset)))
    if not subset:
        raise ValueError("item subset must be non-empty")
    if subset[0] < 0 or subset[-1] >= n:
        raise IndexError(f"item subset {subset} out of range")
    exact = inst.is_exact
    zero, one = _zero(exact), (Fraction(1) if exact else 1.0)
    k = len(subset)
    ncols = m * k
    c = [inst.values[i][j] for i in range(m) for j in subset]
    A = []
    for i in range(m):
        row = [zero] * ncols
        for q, j in enumerate(subset):
            row[i * k + q] = inst.sizes[i][j]
        A.append(row)
    for q in range(k):
        row = [zero] * ncols
        for i in range(m):
            row[i * k + q] = one
        A.append(row)
    b = list(inst.capacities) + [one] * k
    res = solve_tableau(c, A, b, exact)

    entries = [[zero] * n for _ in range(m)]
    for i in range(m):
        for q, j in enumerate(subset):
            x = res.x[i * k + q]
            if not exact:
                x = min(max(x, 0.0), 1.0)
            entries[i][j] = x
    if not exact:
        # float noise may push a column a hair above 1; scale it back
        for j in subset:
            s = sum(entries[i][j] for i in range(m))
            if s > 1.0:
                for i in range(m):
                    entries[i][j] /= s
    item_prices = [zero] * n
    for q, j in enumerate(subset):
        item_prices[j] = res.duals[m + q]
    primal = FractionalAssignment(tuple(tuple(r) for r in entries))
    objective = sum((inst.values[i][j] * entries[i][j] for i in range(m) for j in subset), zero)
    return LpSolution(primal, objective, tuple(res.duals[:m]), tuple(item_prices),
                      res.basis, subset)


class LpCache:
    """Memoizes :func:`solve_fractional_gap` per item subset for one instance.

    The online algorithms re-solve the relaxation on every prefix of the
    arrival order; on small instances the same subsets recur constantly.
    """

    def __init__(self, inst: GapInstance):
        self.inst = inst
        self._memo: dict[frozenset, LpSolution] = {}
        self.hits = 0

    def solve(self, subset) -> LpSolution:
        key = frozenset(subset)
        sol = self._memo.get(key)
        if sol is None:
            sol = self._memo[key] = solve_fractional_gap(self.inst, key)
        else:
            self.hits += 1
        return sol

    def __len__(self) -> int:
        return len(self._memo)


@dataclass
class OptimalityReport:
    primal_feasible: bool = True
    dual_feasible: bool = True
    complementary: bool = True
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.primal_feasible and self.dual_feasible and self.complementary

    def __bool__(self) -> bool:
        return self.ok


def verify_lp_optimality(inst: GapInstance, subset: Iterable[int], sol: LpSolution,
                         tol: float = 1e-7) -> OptimalityReport:
    """Duality certificate: primal and dual feasibility plus complementary slackness.

    Zero tolerance when the instance and the solution are exact.
    """
    m, n = inst.num_bins, inst.num_items
    subset = set(subset)
    x = sol.primal.entries
    if sol.primal.shape != (m, n) or len(sol.bin_prices) != m or len(sol.item_prices) != n:
        raise DimensionMismatch("solution does not match instance dimensions")
    exact = inst.is_exact and all(
        isinstance(e, Fraction) for e in [*sol.bin_prices, *sol.item_prices, *(e for r in x for e in r)]
    )
    eps = 0 if exact else tol
    rep = OptimalityReport()

    def close(a, b) -> bool:
        return a == b if exact else abs(a - b) <= eps * max(1.0, abs(float(b)))

    for i in range(m):
        load = sum((inst.sizes[i][j] * x[i][j] for j in range(n)), _zero(exact))
        if not leq(load, inst.capacities[i], eps * max(1.0, float(inst.capacities[i]))):
            rep.primal_feasible = False
            rep.violations.append(f"bin {i} over capacity: load {load} > {inst.capacities[i]}")
        u = sol.bin_prices[i]
        if u < -eps:
            rep.dual_feasible = False
            rep.violations.append(f"bin {i} has negative price {u}")
        if u > eps and not close(load, inst.capacities[i]):
            rep.complementary = False
            rep.violations.append(f"bin {i} has positive price {u} but slack capacity")
    for j in range(n):
        col = sum((x[i][j] for i in range(m)), _zero(exact))
        p = sol.item_prices[j]
        if j not in subset:
            if any(x[i][j] != 0 for i in range(m)):
                rep.primal_feasible = False
                rep.violations.append(f"item {j} is outside the subset but assigned")
            if p != 0:
                rep.dual_feasible = False
                rep.violations.append(f"item {j} is outside the subset but priced")
            continue
        if not leq(col, 1, eps):
            rep.primal_feasible = False
            rep.violations.append(f"item {j} assigned more than once: {col}")
        if any(x[i][j] < -eps for i in range(m)):
            rep.primal_feasible = False
            rep.violations.append(f"item {j} has a negative entry")
        if p < -eps:
            rep.dual_feasible = False
            rep.violations.append(f"item {j} has negative price {p}")
        if p > eps and not close(col, 1):
            rep.complementary = False
            rep.violations.append(f"item {j} has positive price {p} but is not fully assigned")
        for i in range(m):
            # reduced cost of x_ij in a max problem is v - (s u + p) <= 0
            cover = inst.sizes[i][j] * sol.bin_prices[i] + p
            if inst.values[i][j] > cover + eps * max(1.0, abs(float(cover))):
                rep.dual_feasible = False
                rep.violations.append(f"bin {i}, item {j}: dual constraint violated")
            if x[i][j] > eps and not close(cover, inst.values[i][j]):
                rep.complementary = False
                rep.violations.append(f"bin {i}, item {j}: positive primal with slack dual row")
    return rep


# --------------------------------------------------------------------------
# integral optima


def solve_integral_gap_bruteforce(inst: GapInstance, budget: int = DEFAULT_BUDGET) -> tuple[Assignment, Number]:
    """Exhaustive search over all decision vectors.

    Item ``j`` takes decision ``0`` (unassigned) or ``i + 1`` (bin ``i``);
    vectors are visited in lexicographic order with capacity pruning, so the
    first maximizer found is the lexicographically smallest one.
    """
    m, n = inst.num_bins, inst.num_items
    states = (m + 1) ** n
    if states > budget:
        raise BudgetExceeded(states, budget)
    exact = inst.is_exact
    caps = inst.capacities
    loads = [_zero(exact)] * m
    choice = [None] * n
    best = [_zero(exact), None]

    def visit(j, value):
        if j == n:
            if best[1] is None or value > best[0]:
                best[0], best[1] = value, list(choice)
            return
        choice[j] = None
        visit(j + 1, value)
        for i in range(m):
            s = inst.sizes[i][j]
            if leq(loads[i] + s, caps[i]):
                loads[i] += s
                choice[j] = i
                visit(j + 1, value + inst.values[i][j])
                loads[i] -= s
        choice[j] = None

    visit(0, _zero(exact))
    return Assignment.from_bins(best[1], m), best[0]


def solve_integral_gap_bnb(inst: GapInstance) -> Number:
    """Optimal integral value by depth-first branch and bound.

    Items are branched in order of decreasing best value, bins in order of
    decreasing value; the bound adds each remaining item's best value among
    bins that still have room for it.
    """
    m, n = inst.num_bins, inst.num_items
    exact = inst.is_exact
    best_val = [max(inst.values[i][j] for i in range(m)) for j in range(n)]
    items = sorted(range(n), key=lambda j: -best_val[j])
    bins_by_value = {j: sorted(range(m), key=lambda i: -inst.values[i][j]) for j in range(n)}
    residual = list(inst.capacities)
    incumbent = [_zero(exact)]

    def bound(depth, value):
        total = value
        for j in items[depth:]:
            room = [inst.values[i][j] for i in range(m) if inst.sizes[i][j] <= residual[i] + (0 if exact else FLOAT_TOL)]
            if room:
                total += max(room)
        return total

    def dfs(depth, value):
        if value > incumbent[0]:
            incumbent[0] = value
        if depth == n or bound(depth, value) <= incumbent[0]:
            return
        j = items[depth]
        for i in bins_by_value[j]:
            s = inst.sizes[i][j]
            if s <= residual[i] + (0 if exact else FLOAT_TOL) and inst.values[i][j] > 0:
                residual[i] -= s
                dfs(depth + 1, value + inst.values[i][j])
                residual[i] += s
        dfs(depth + 1, value)

    dfs(0, _zero(exact))
    return incumbent[0]


def solve_integral_knapsack_bruteforce(inst: KnapsackInstance, budget: int = DEFAULT_BUDGET) -> Number:
    """Best value over all subsets that fit."""
    n = inst.num_items
    if 2**n > budget:
        raise BudgetExceeded(2**n, budget)
    exact = inst.is_exact
    best = [_zero(exact)]

    def visit(j, used, value):
        if j == n:
            best[0] = max(best[0], value)
            return
        visit(j + 1, used, value)
        s = inst.sizes[j]
        if leq(used + s, inst.capacity):
            visit(j + 1, used + s, value + inst.values[j])

    visit(0, _zero(exact), _zero(exact))
    return best[0]
