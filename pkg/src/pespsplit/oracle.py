"""Brute-force ground truth for tiny instances.

* :func:`ip_optimum` enumerates the integer cycle offsets inside their
  cycle-inequality boxes and solves the remaining LP for each.
* :func:`split_closure_optimum` iterates exact LP solves with per-cycle
  separation (all flip sets on short cycles) until nothing is violated.
* :func:`best_F_bruteforce` tries every flip set of one cycle.
* :func:`projection_check` compares split closure optima across a free
  augmentation or a subdivision.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np
from scipy.optimize import linprog

from .cycles import (CycleLimitExceeded, cycle_value, fundamental_basis, min_spanning_tree,
                     simple_cycles)
from .inequalities import FlipCut, alpha, cycle_bounds, flip_cut, violation
from .instance import (InfeasibleError, Number, PespError, PespInstance, free_augment,
                       subdivide)
from .lp import build_model, solve
from .separation import separate_fixed_cycle


class BudgetExceeded(PespError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_simple_cycles: int = 10_000
    max_z_combinations: int = 10_000_000
    max_F_exponent: int = 20
    max_rounds: int = 1_000

    def __post_init__(self):
        if min(self.max_simple_cycles, self.max_z_combinations, self.max_F_exponent, self.max_rounds) <= 0:
            raise ValueError("budgets must be positive")


DEFAULT_BUDGET = OracleBudget()


def _objective(inst: PespInstance, x: Mapping[int, Number]) -> Fraction:
    return sum((a.weight * Fraction(x[a.id]) for a in inst.arcs), Fraction(0)) + inst.objective_offset


def _exact_fallback(inst: PespInstance, basis, z) -> Optional[dict[int, Fraction]]:
    """Exact LP for one offset vector, with the cycle equations as row pairs."""
    model = build_model(inst)
    T = inst.period
    for gamma, zk in zip(basis.cycles, z):
        coef = {a: Fraction(s) for a, s in gamma.items()}
        model.add_row(coef, Fraction(T * zk))
        model.add_row({a: -c for a, c in coef.items()}, Fraction(-T * zk))
    sol = solve(model, exact=True)
    if sol.status != "optimal":
        return None
    return {a.id: Fraction(sol.x[i]) for i, a in enumerate(inst.arcs)}


def ip_optimum(inst: PespInstance, budget: OracleBudget = DEFAULT_BUDGET
               ) -> tuple[Fraction, dict[int, int]]:
    """The integer optimum ``w^T x + offset`` and one optimal periodic tension.

    For every offset vector z in the product of cycle-inequality boxes the LP
    ``min w^T x, l <= x <= u, Gamma x = T z`` is solved with HiGHS. The cycle
    matrix of a fundamental basis is totally unimodular, so an optimal vertex
    is integral; it is rounded and re-checked exactly.
    """
    T = inst.period
    basis = fundamental_basis(inst, min_spanning_tree(inst, {a.id: a.span for a in inst.arcs}))
    boxes = [cycle_bounds(inst, g) for g in basis.cycles]
    if any(lo > hi for lo, hi in boxes):
        raise InfeasibleError("a cycle inequality has an empty slab")
    n_comb = math.prod(hi - lo + 1 for lo, hi in boxes)
    if n_comb > budget.max_z_combinations:
        raise BudgetExceeded(f"{n_comb} offset combinations exceed the budget")
    n = len(inst.arcs)
    c = np.array([float(a.weight) for a in inst.arcs])
    bounds = [(a.lower, a.upper) for a in inst.arcs]
    G = np.zeros((len(basis.cycles), n))
    for k, g in enumerate(basis.cycles):
        for a_id, s in g.items():
            G[k, inst.position(a_id)] = s
    best_val: Optional[Fraction] = None
    best_x: Optional[dict[int, int]] = None
    for z in itertools.product(*(range(lo, hi + 1) for lo, hi in boxes)):
        if G.shape[0]:
            res = linprog(c, A_eq=G, b_eq=T * np.array(z, dtype=float), bounds=bounds, method="highs")
            if res.status == 2:
                continue
            if res.status != 0:
                raise PespError(f"HiGHS failed on offsets {z}: {res.message}")
            xr = {a.id: int(round(v)) for a, v in zip(inst.arcs, res.x)}
        else:
            xr = {a.id: (a.lower if a.weight >= 0 else a.upper) for a in inst.arcs}
        ok = all(a.lower <= xr[a.id] <= a.upper for a in inst.arcs) and all(
            cycle_value(g, xr) == T * zk for g, zk in zip(basis.cycles, z))
        if ok and G.shape[0] and abs(float(_objective(inst, xr)) - float(res.fun) - float(inst.objective_offset)) > 1e-6:
            ok = False
        if not ok:
            xe = _exact_fallback(inst, basis, z)
            if xe is None:
                continue
            if any(v.denominator != 1 for v in xe.values()):
                raise PespError("non-integral vertex for a totally unimodular system")
            xr = {a: int(v) for a, v in xe.items()}
        val = _objective(inst, xr)
        if best_val is None or val < best_val:
            best_val, best_x = val, xr
    if best_val is None:
        raise InfeasibleError("no offset vector admits a feasible tension")
    return best_val, best_x


def best_F_bruteforce(inst: PespInstance, gamma: Mapping[int, int], x: Mapping[int, Number],
                      budget: OracleBudget = DEFAULT_BUDGET) -> tuple[Optional[frozenset[int]], Number]:
    """Most violated flip set of gamma by enumeration over all subsets of its support.

    Flip sets with alpha = 0 are skipped; returns ``(None, -inf)`` if all are.
    """
    support = sorted(gamma)
    if len(support) > budget.max_F_exponent:
        raise BudgetExceeded(f"|gamma| = {len(support)} exceeds the flip-set budget")
    best_F, best_v = None, -math.inf
    for k in range(len(support) + 1):
        for F in itertools.combinations(support, k):
            if alpha(inst, gamma, F) == 0:
                continue
            v = violation(flip_cut(inst, gamma, F), x)
            if v > best_v:
                best_F, best_v = frozenset(F), v
    return best_F, best_v


@dataclass
class SplitClosureResult:
    value: Fraction
    x: dict[int, Fraction]
    cuts: list[FlipCut]
    rounds: int


def _most_violated(inst, gamma, x, tol, bruteforce_up_to):
    if len(gamma) <= bruteforce_up_to:
        F, v = best_F_bruteforce(inst, gamma, x)
        return flip_cut(inst, gamma, F) if F is not None and v > tol else None
    return separate_fixed_cycle(inst, gamma, x, tol=tol, check_simple=False)


def split_closure(inst: PespInstance, budget: OracleBudget = DEFAULT_BUDGET,
                  exact: Optional[bool] = None, bruteforce_up_to: int = 10) -> SplitClosureResult:
    """Optimize over all flip inequalities of all simple cycles by iterated exact separation.

    Cycles with at most ``bruteforce_up_to`` arcs are separated by trying every
    flip set, so on tiny instances the result does not depend on the
    closed-form rule used by the engine.
    """
    if exact is None:
        exact = len(inst.arcs) <= 50
    try:
        cycles = simple_cycles(inst, limit=budget.max_simple_cycles)
    except CycleLimitExceeded as exc:
        raise BudgetExceeded(str(exc)) from exc
    model = build_model(inst)
    sol = solve(model, exact=exact)
    tol = 0 if exact else 1e-9
    cuts: list[FlipCut] = []
    keys = set()
    for rounds in range(1, budget.max_rounds + 1):
        if sol.status != "optimal":
            raise InfeasibleError("LP with flip cuts is infeasible")
        x = sol.tension(model)
        new = []
        for g in cycles:
            c = _most_violated(inst, g, x, tol, bruteforce_up_to)
            if c is not None and c.key not in keys:
                new.append(c)
                keys.add(c.key)
        if not new:
            val = Fraction(sol.objective) if exact else sol.objective
            return SplitClosureResult(val, dict(x), cuts, rounds)
        cuts.extend(new)
        for c in new:
            model.add_cut(c)
        sol = solve(model, warm=sol, exact=exact)
    raise BudgetExceeded("separation rounds exceeded")


def split_closure_optimum(inst: PespInstance, budget: OracleBudget = DEFAULT_BUDGET
                          ) -> tuple[Fraction, dict[int, Fraction]]:
    res = split_closure(inst, budget)
    return res.value, res.x


def lp_box_optimum(inst: PespInstance) -> Fraction:
    return sum((min(a.weight * a.lower, a.weight * a.upper) for a in inst.arcs), Fraction(0)) \
        + inst.objective_offset


def default_split(inst: PespInstance, arc_id: int) -> tuple[int, int, int, int]:
    """Halve the bounds, first part rounded up."""
    a = inst.arc(arc_id)
    l1, u1 = -(-a.lower // 2), -(-a.upper // 2)
    return l1, u1, a.lower - l1, a.upper - u1


def projection_check(inst: PespInstance, transform: str, weights: Optional[Mapping[int, Number]] = None,
                     seed: Optional[int] = None, arc_id: Optional[int] = None,
                     budget: OracleBudget = DEFAULT_BUDGET, points: int = 100, tol: float = 1e-6) -> bool:
    """Whether the split closure optimum is invariant under the transformation.

    ``transform`` is ``"free_augment"``, ``"subdivide"`` or ``"identity"``.
    Unless ``weights`` is given, random integer weights in [0, 10] are drawn.
    New free arcs get weight 0; both subdivision parts carry the weight of the
    original arc, so the objectives correspond under the summation map. For
    subdivisions the spread-then-sum composition is also checked to be the
    identity on ``points`` random box points.
    """
    rng = random.Random(seed)
    if weights is None:
        weights = {a.id: rng.randint(0, 10) for a in inst.arcs}
    base = inst.with_arcs([type(a)(a.id, a.tail, a.head, a.lower, a.upper, Fraction(weights[a.id]))
                           for a in inst.arcs])
    if transform == "identity":
        other = base
    elif transform == "free_augment":
        other, _hub, _arcs = free_augment(base)
    elif transform == "subdivide":
        cands = [a.id for a in base.arcs if a.lower < a.upper]
        if not cands:
            raise ValueError("no arc with positive span to subdivide")
        target = arc_id if arc_id is not None else rng.choice(cands)
        other, sub = subdivide(base, target, default_split(base, target))
        for _ in range(points):
            x = {b.id: Fraction(rng.randint(0, 1000), 1000) * (b.upper - b.lower) + b.lower
                 for b in base.arcs}
            back = sub.sum_map(sub.spread_map(x))
            if back != x:
                return False
            y = sub.spread_map(x)
            if not (sub.first.lower <= y[sub.first.id] <= sub.first.upper
                    and sub.second.lower <= y[sub.second.id] <= sub.second.upper):
                return False
    else:
        raise ValueError(f"unknown transform {transform!r}")
    v1, _ = split_closure_optimum(base, budget)
    v2, _ = split_closure_optimum(other, budget)
    return abs(Fraction(v1) - Fraction(v2)) <= tol
