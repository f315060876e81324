"""Root-node cutting plane loop over flip inequalities.

Solve the LP; stop if the induced cycle offsets are integral. Otherwise add
MST-heuristic cuts while it finds any, and fall back to the exact per-alpha
search when it does not. The run ends when a full alpha sweep finds nothing
(the point is in the split closure) or the time limit is hit.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .cycles import fundamental_basis, min_spanning_tree, cycle_value
from .inequalities import FlipCut, violation
from .instance import PespInstance, biconnected_blocks
from .lp import LpModel, LpSolution, build_model, remove_rows, solve
from .separation import (VIOLATION_TOL, exact_certify, heuristic_separate)

log = logging.getLogger(__name__)

SPLIT_CLOSURE_OPTIMAL = "SplitClosureOptimal"
TIME_LIMIT = "TimeLimit"
INTEGRAL_LP = "IntegralLp"
HEURISTIC_EXHAUSTED = "HeuristicExhausted"
INFEASIBLE = "Infeasible"


@dataclass
class EngineConfig:
    time_limit: float = 3600.0
    max_cuts_per_round: int = 50
    alpha_order: str = "desc"          # "desc" starts at floor(T/2), "asc" at 1
    pool_max: int = 100_000
    violation_tolerance: float = VIOLATION_TOL
    cosine_limit: float = 0.999
    max_idle: int = 20
    heuristic_only: bool = False
    exact_lp: bool = False
    threads: int = 1
    integrality_tol: float = 1e-6

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.alpha_order not in ("desc", "asc"):
            raise ValueError("alpha_order is 'desc' or 'asc'")


@dataclass
class LogEntry:
    wall_time_s: float
    iteration: int
    phase: str
    alpha: Optional[int]
    cuts_added: int
    pool_size: int
    lp_bound_wx: float
    lp_bound_slack: float

    FIELDS = ("wall_time_s", "iteration", "phase", "alpha", "cuts_added", "pool_size",
              "lp_bound_wx", "lp_bound_slack")

    def row(self) -> list:
        return [f"{self.wall_time_s:.6f}", self.iteration, self.phase,
                "" if self.alpha is None else self.alpha, self.cuts_added, self.pool_size,
                repr(self.lp_bound_wx), repr(self.lp_bound_slack)]


@dataclass
class Report:
    instance: str
    period: int
    mu: int
    status: str
    bound_wx: float
    bound_slack: float
    cuts_total: int
    cuts_exact: int
    runtime_s: float
    bound_before_exact: float
    cuts: list[FlipCut] = field(default_factory=list)
    log: list[LogEntry] = field(default_factory=list)
    x: Optional[dict[int, float]] = None
    certificate: dict[int, float] = field(default_factory=dict)
    fallback_used: bool = False

    def to_json(self, with_cuts: bool = True) -> dict:
        out = {
            "instance": self.instance,
            "period": self.period,
            "mu": self.mu,
            "status": self.status,
            "bound_wx": self.bound_wx,
            "bound_slack": self.bound_slack,
            "cuts_total": self.cuts_total,
            "cuts_exact": self.cuts_exact,
            "runtime_s": self.runtime_s,
            "bound_before_exact": self.bound_before_exact,
        }
        if with_cuts:
            out["cuts"] = [c.to_json() for c in self.cuts]
        return out

    def write_log(self, path) -> None:
        write_log_csv(self.log, path)


def write_log_csv(entries: Iterable[LogEntry], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LogEntry.FIELDS)
        for e in entries:
            w.writerow(e.row())


# ---------------------------------------------------------------------------
# cut pool
# ---------------------------------------------------------------------------

@dataclass
class PoolEntry:
    cut: FlipCut
    exact: bool
    idle: int = 0


class CutPool:
    """Cuts currently in the LP, aligned with the model rows."""

    def __init__(self):
        self.entries: list[PoolEntry] = []
        self.keys: set[tuple] = set()
        self.norm_keys: set[tuple] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, cut: FlipCut) -> bool:
        return cut.key in self.keys or cut.normalized_key() in self.norm_keys

    def add(self, cut: FlipCut, exact: bool) -> None:
        self.entries.append(PoolEntry(cut, exact))
        self.keys.add(cut.key)
        self.norm_keys.add(cut.normalized_key())

    def drop(self, rows: Iterable[int]) -> None:
        for i in sorted(set(rows), reverse=True):
            e = self.entries.pop(i)
            self.keys.discard(e.cut.key)
            self.norm_keys.discard(e.cut.normalized_key())

    def idle_rows(self, duals, max_idle: int, tol: float = 1e-12) -> list[int]:
        """Advance idle counters from the new duals; return rows past the age limit."""
        out = []
        for i, e in enumerate(self.entries):
            if e.exact:
                continue
            e.idle = e.idle + 1 if abs(float(duals[i])) <= tol else 0
            if e.idle >= max_idle:
                out.append(i)
        return out


def _cosine(a: dict, b: dict) -> float:
    dot = sum(float(v) * float(b[k]) for k, v in a.items() if k in b)
    na = math.sqrt(sum(float(v) ** 2 for v in a.values()))
    nb = math.sqrt(sum(float(v) ** 2 for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def pool_filter(pool: CutPool, candidates: Iterable[FlipCut], x, max_cuts: int = 50,
                cosine_limit: float = 0.999) -> list[FlipCut]:
    """Select candidates: no duplicates of pool cuts, no near-parallel pairs, at most max_cuts."""
    scored = sorted(((float(violation(c, x)), c) for c in candidates), key=lambda t: (-t[0], t[1].key))
    accepted: list[FlipCut] = []
    keys = set()
    for _v, c in scored:
        if c in pool or c.key in keys or c.normalized_key() in keys:
            continue
        if any(_cosine(c.coefficients, o.coefficients) > cosine_limit for o in accepted):
            continue
        accepted.append(c)
        keys.add(c.key)
        keys.add(c.normalized_key())
        if len(accepted) >= max_cuts:
            break
    return accepted


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------

def _bounds(inst: PespInstance, model: LpModel, sol: LpSolution) -> tuple[float, float]:
    wx = float(sol.objective)
    wl = float(sum(a.weight * a.lower for a in inst.arcs))
    return wx, wx - float(inst.objective_offset) - wl


def integral_offsets(inst: PespInstance, x, basis=None, tol: float = 1e-6) -> bool:
    """Whether ``Gamma x / T`` is integral on the span-ordered fundamental basis."""
    if basis is None:
        basis = fundamental_basis(inst, min_spanning_tree(inst, {a.id: a.span for a in inst.arcs}))
    T = inst.period
    for gamma in basis.cycles:
        z = float(cycle_value(gamma, x)) / T
        if abs(z - round(z)) > tol:
            return False
    return True


def run(inst: PespInstance, config: Optional[EngineConfig] = None) -> Report:
    """The cutting plane loop on a preprocessed instance."""
    config = config or EngineConfig()
    t0 = time.perf_counter()
    deadline = t0 + config.time_limit
    T = inst.period
    model = build_model(inst)
    pool = CutPool()
    sol = solve(model, exact=config.exact_lp)
    zbasis = fundamental_basis(inst, min_spanning_tree(inst, {a.id: a.span for a in inst.arcs}))
    entries: list[LogEntry] = []
    it = 0
    alpha_cursor = T // 2 if config.alpha_order == "desc" else 1
    cuts_total = cuts_exact = 0
    bound_before_exact: Optional[float] = None
    certificate: dict[int, float] = {}
    fallback = False
    last_wall = -1.0
    all_cuts: list[FlipCut] = []

    def record(phase: str, alpha, added: int) -> None:
        nonlocal last_wall
        wall = time.perf_counter() - t0
        if wall <= last_wall:
            wall = math.nextafter(last_wall, math.inf)
        last_wall = wall
        wx, sl = _bounds(inst, model, sol) if sol.status == "optimal" else (math.nan, math.nan)
        entries.append(LogEntry(wall, it, phase, alpha, added, len(pool), wx, sl))

    def add(cuts: list[FlipCut], exact: bool):
        nonlocal sol, cuts_total, cuts_exact
        for c in cuts:
            model.add_cut(c)
            pool.add(c, exact)
        all_cuts.extend(cuts)
        cuts_total += len(cuts)
        if exact:
            cuts_exact += len(cuts)
        sol = solve(model, warm=sol, exact=config.exact_lp)
        if sol.status == "optimal":
            stale = pool.idle_rows(sol.duals, config.max_idle)
            if stale:
                dropped = remove_rows(model, sol, stale)
                pool.drop(dropped)

    record("heuristic", None, 0)
    status = None
    while status is None:
        if sol.status != "optimal":
            status = INFEASIBLE
            break
        if time.perf_counter() >= deadline:
            status = TIME_LIMIT
            break
        x = sol.tension(model)
        if integral_offsets(inst, x, zbasis, config.integrality_tol):
            status = INTEGRAL_LP
            break
        it += 1
        cand = heuristic_separate(inst, x)
        cand = [c for c in cand if float(violation(c, x)) > config.violation_tolerance]
        acc = pool_filter(pool, cand, x, config.max_cuts_per_round, config.cosine_limit)
        if acc:
            add(acc, exact=False)
            record("heuristic", None, len(acc))
            continue
        if config.heuristic_only:
            status = HEURISTIC_EXHAUSTED
            break
        out = exact_certify(inst, x, start=alpha_cursor, threads=config.threads,
                            ascending=config.alpha_order == "asc", deadline=deadline)
        certificate = out.certificate
        fallback |= out.fallback_used
        if out.kind == "InClosure":
            status = SPLIT_CLOSURE_OPTIMAL
            break
        if out.kind == "Incomplete":
            status = TIME_LIMIT
            break
        new = [c for c in out.cuts if c not in pool]
        if not new:
            # every violated cut is already a row: the LP point should satisfy it
            log.warning("exact phase returned only pooled cuts; treating as numerically closed")
            status = SPLIT_CLOSURE_OPTIMAL
            break
        if bound_before_exact is None:
            bound_before_exact = _bounds(inst, model, sol)[0]
        alpha_cursor = out.resume_alpha
        add(new, exact=True)
        record("exact", out.alpha, len(new))

    if sol.status == "optimal":
        wx, sl = _bounds(inst, model, sol)
        xfin = {a: float(v) for a, v in sol.tension(model).items()}
    else:
        wx = sl = math.inf
        xfin = None
    return Report(
        instance=inst.name, period=T, mu=inst.mu, status=status, bound_wx=wx, bound_slack=sl,
        cuts_total=cuts_total, cuts_exact=cuts_exact, runtime_s=time.perf_counter() - t0,
        bound_before_exact=wx if bound_before_exact is None else bound_before_exact,
        cuts=all_cuts, log=entries, x=xfin, certificate=certificate, fallback_used=fallback,
    )


# ---------------------------------------------------------------------------
# block decomposition
# ---------------------------------------------------------------------------

def decompose_by_blocks(inst: PespInstance) -> list[PespInstance]:
    """One sub-instance per biconnected block; bridges become single-arc blocks.

    The objective offset is not carried by any block.
    """
    out = []
    for k, block in enumerate(biconnected_blocks(inst)):
        arcs = [inst.arc(a) for a in block]
        nodes = sorted({a.tail for a in arcs} | {a.head for a in arcs})
        out.append(PespInstance(tuple(nodes), tuple(arcs), inst.period, Fraction(0),
                                f"{inst.name}#block{k}"))
    return out


def run_by_blocks(inst: PespInstance, config: Optional[EngineConfig] = None) -> Report:
    """Run each block separately and add up the bounds."""
    config = config or EngineConfig()
    t0 = time.perf_counter()
    reports = [run(b, config) for b in decompose_by_blocks(inst)]
    statuses = {r.status for r in reports}
    if INFEASIBLE in statuses:
        status = INFEASIBLE
    elif TIME_LIMIT in statuses:
        status = TIME_LIMIT
    elif HEURISTIC_EXHAUSTED in statuses:
        status = HEURISTIC_EXHAUSTED
    elif statuses <= {INTEGRAL_LP}:
        status = INTEGRAL_LP
    else:
        status = SPLIT_CLOSURE_OPTIMAL
    off = float(inst.objective_offset)
    x: dict[int, float] = {}
    for r in reports:
        x.update(r.x or {})
    return Report(
        instance=inst.name, period=inst.period, mu=inst.mu, status=status,
        bound_wx=sum(r.bound_wx for r in reports) + off,
        bound_slack=sum(r.bound_slack for r in reports),
        cuts_total=sum(r.cuts_total for r in reports),
        cuts_exact=sum(r.cuts_exact for r in reports),
        runtime_s=time.perf_counter() - t0,
        bound_before_exact=sum(r.bound_before_exact for r in reports) + off,
        cuts=[c for r in reports for c in r.cuts],
        x=x, fallback_used=any(r.fallback_used for r in reports),
    )
