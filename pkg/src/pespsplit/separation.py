"""Separation of flip inequalities.

Three routines:

* :func:`separate_fixed_cycle` picks a maximally violated flip set F for one
  simple cycle in linear time.
* :func:`heuristic_separate` runs it on the fundamental cycles of a minimum
  spanning tree under the periodic slack ``x - l``.
* :func:`exact_separate_alpha` searches all cycles at once for a fixed residue
  alpha as shortest closed walks in a residue-layered copy of the graph, and
  :func:`exact_certify` sweeps alpha.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .cycles import (OrientedCycle, cycle_value, fundamental_basis, is_simple_cycle,
                     min_spanning_tree, simple_cycles)
from .inequalities import FlipCut, TrivialCutError, alpha as alpha_of, flip_cut, violation
from .instance import InstanceError, Number, PespInstance

log = logging.getLogger(__name__)

VIOLATION_TOL = 1e-6
RESIDUE_TOL = 1e-9
CERT_TOL = 1e-7

MODES = ("y+", "f+", "y-", "f-")


def _is_exact(x: Mapping[int, Number]) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in x.values())


# ---------------------------------------------------------------------------
# fixed cycle
# ---------------------------------------------------------------------------

def best_flip_set(inst: PespInstance, gamma: Mapping[int, int], x: Mapping[int, Number]
                  ) -> Optional[frozenset[int]]:
    """The flip set of the threshold rule, or None when ``gamma^T x`` is a multiple of T."""
    T = inst.period
    exact = _is_exact(x)
    val = cycle_value(gamma, x)
    if not exact:
        val = float(val)
    r = (-val) % T
    tol = 0 if exact else RESIDUE_TOL
    if r <= tol or T - r <= tol:
        return None
    g = Fraction(T) / r if exact else T / r
    F = []
    for a_id, s in gamma.items():
        a = inst.arc(a_id)
        xa = x[a_id] if exact else float(x[a_id])
        if s > 0 and a.span >= g * (a.upper - xa):
            F.append(a_id)
        elif s < 0 and a.span <= g * (xa - a.lower):
            F.append(a_id)
    return frozenset(F)


def separate_fixed_cycle(inst: PespInstance, gamma: Mapping[int, int], x: Mapping[int, Number],
                         tol: float = VIOLATION_TOL, check_simple: bool = True) -> Optional[FlipCut]:
    """A most violated flip inequality for the simple cycle gamma, if it is violated by more than tol."""
    if check_simple and not is_simple_cycle(inst, gamma):
        raise InstanceError("separate_fixed_cycle needs a simple cycle")
    F = best_flip_set(inst, gamma, x)
    if F is None or alpha_of(inst, gamma, F) == 0:
        return None
    cut = flip_cut(inst, gamma, F)
    if violation(cut, x) > tol:
        return cut
    return None


def _dedup_sorted(cuts: Iterable[FlipCut], x: Mapping[int, Number]) -> list[FlipCut]:
    seen: dict[tuple, FlipCut] = {}
    for c in cuts:
        seen.setdefault(c.key, c)
    return sorted(seen.values(), key=lambda c: (-float(violation(c, x)), c.key))


def heuristic_separate(inst: PespInstance, x: Mapping[int, Number]) -> list[FlipCut]:
    """Fixed-cycle separation over the fundamental cycles of an MST under ``x - l``.

    Returns violated cuts sorted by violation, largest first, without
    duplicate provenance.
    """
    key = {a.id: float(x[a.id]) - a.lower for a in inst.arcs}
    basis = fundamental_basis(inst, min_spanning_tree(inst, key))
    cuts = []
    for gamma in basis.cycles:
        c = separate_fixed_cycle(inst, gamma, x, check_simple=False)
        if c is not None:
            cuts.append(c)
    return _dedup_sorted(cuts, x)


# ---------------------------------------------------------------------------
# residue-layered graph
# ---------------------------------------------------------------------------

@dataclass
class LayeredGraph:
    """Nodes ``(v, r)``, flattened to ``index(v) * T + r``; one edge per arc, mode and residue.

    Traversing arc a forward shifts the residue by ``-l_a`` (mode y+) or
    ``-u_a`` (mode f+); traversing it backward shifts by ``+l_a`` (y-) or
    ``+u_a`` (f-). A closed walk from ``(v, 0)`` to ``(v, alpha)`` is a cycle
    with a flip set whose residue is alpha, and its cost is the left-hand side
    of that flip inequality at x.
    """

    inst: PespInstance
    alpha: int
    matrix: csr_matrix
    labels: dict[tuple[int, int], tuple[int, str]]
    node_index: dict[int, int]
    min_edge_cost: float

    @classmethod
    def build(cls, inst: PespInstance, x: Mapping[int, Number], alpha: int,
              tol: float = 1e-9) -> "LayeredGraph":
        T = inst.period
        if not 1 <= alpha <= T - 1:
            raise ValueError(f"alpha must lie in [1, {T - 1}]")
        idx = {v: k for k, v in enumerate(inst.nodes)}
        best: dict[tuple[int, int], tuple[float, int, str]] = {}
        r = np.arange(T)
        min_cost = math.inf
        for a in inst.arcs:
            xa = float(x[a.id])
            dl, du = xa - a.lower, a.upper - xa
            fam = (
                ("y+", idx[a.tail], idx[a.head], -a.lower, (T - alpha) * dl),
                ("f+", idx[a.tail], idx[a.head], -a.upper, alpha * du),
                ("y-", idx[a.head], idx[a.tail], a.lower, alpha * dl),
                ("f-", idx[a.head], idx[a.tail], a.upper, (T - alpha) * du),
            )
            for mode, s, t, shift, cost in fam:
                if cost < -tol:
                    raise ValueError(f"negative layered edge cost {cost} on arc {a.id} ({mode})")
                cost = max(cost, 0.0)
                min_cost = min(min_cost, cost)
                src = s * T + r
                dst = t * T + (r + shift) % T
                for u_, v_ in zip(src.tolist(), dst.tolist()):
                    old = best.get((u_, v_))
                    if old is None or cost < old[0]:
                        best[(u_, v_)] = (cost, a.id, mode)
        n = len(inst.nodes) * T
        if best:
            keys = np.array(list(best.keys()), dtype=np.int64)
            vals = np.array([v[0] for v in best.values()])
            mat = csr_matrix((vals, (keys[:, 0], keys[:, 1])), shape=(n, n))
        else:
            mat = csr_matrix((n, n))
        labels = {k: (v[1], v[2]) for k, v in best.items()}
        return cls(inst, alpha, mat, labels, idx, min_cost)

    def shortest_closed_walks(self) -> tuple[np.ndarray, np.ndarray]:
        """Distances from every ``(v, 0)`` to ``(v, alpha)`` together with the predecessor rows."""
        T = self.inst.period
        nv = len(self.inst.nodes)
        sources = np.arange(nv) * T
        dist, pred = dijkstra(self.matrix, directed=True, indices=sources, return_predecessors=True)
        targets = sources + self.alpha
        return dist[np.arange(nv), targets], pred

    def walk(self, pred: np.ndarray, k: int) -> list[tuple[int, str, int, int]]:
        """Edges ``(arc, mode, from_node, to_node)`` of the walk from source k, in order."""
        T = self.inst.period
        src = k * T
        node = k * T + self.alpha
        row = pred[k]
        out = []
        while node != src:
            p = int(row[node])
            if p < 0:
                raise RuntimeError("broken predecessor chain")
            arc_id, mode = self.labels[(p, node)]
            out.append((arc_id, mode, p // T, node // T))
            node = p
        out.reverse()
        return out


def walk_loops(inst: PespInstance, walk: list[tuple[int, str, int, int]]
               ) -> list[tuple[OrientedCycle, frozenset[int]]]:
    """Split a closed walk at repeated vertices into simple loops with their flip sets.

    Loops that traverse one arc back and forth cancel to zero and are dropped.
    """
    loops = []
    stack: list[tuple[int, Optional[tuple[int, str]]]] = []
    if not walk:
        return loops
    stack.append((walk[0][2], None))
    for arc_id, mode, _u, v in walk:
        stack.append((v, (arc_id, mode)))
        pos = next((i for i in range(len(stack) - 1) if stack[i][0] == v), None)
        if pos is None:
            continue
        piece = [e for _, e in stack[pos + 1:]]
        del stack[pos + 1:]
        gamma: dict[int, int] = {}
        flips = set()
        for a, m in piece:
            gamma[a] = gamma.get(a, 0) + (1 if m[1] == "+" else -1)
            if m[0] == "f":
                flips.add(a)
        gamma = {a: s for a, s in gamma.items() if s}
        if gamma:
            loops.append((OrientedCycle(gamma), frozenset(flips)))
    return loops


def _cycles_on_support(inst: PespInstance, support: set[int]) -> list[OrientedCycle]:
    sub_arcs = [a for a in inst.arcs if a.id in support]
    nodes = sorted({a.tail for a in sub_arcs} | {a.head for a in sub_arcs})
    sub = PespInstance(tuple(nodes), tuple(sub_arcs), inst.period)
    return simple_cycles(sub)


@dataclass
class AlphaResult:
    alpha: int
    min_cost: float
    cuts: list[FlipCut]
    below_threshold: int = 0
    fallback_used: bool = False


def exact_separate_alpha(inst: PespInstance, x: Mapping[int, Number], alpha: int,
                         tol: float = VIOLATION_TOL) -> AlphaResult:
    """Exact separation of flip inequalities with residue alpha.

    Every closed walk of residue alpha whose cost is below ``alpha (T - alpha)``
    is split into simple loops, and each loop is re-optimized over F. When a
    below-threshold walk yields nothing, all simple cycles on its arc support
    are tried instead.
    """
    T = inst.period
    if not 1 <= alpha <= T // 2:
        raise ValueError(f"alpha must lie in [1, {T // 2}]")
    lg = LayeredGraph.build(inst, x, alpha)
    dist, pred = lg.shortest_closed_walks()
    threshold = alpha * (T - alpha) - CERT_TOL
    min_cost = float(np.min(dist)) if dist.size else math.inf
    res = AlphaResult(alpha, min_cost, [])
    if min_cost >= threshold:
        return res
    cuts: list[FlipCut] = []
    seen_walks = set()
    for k in np.flatnonzero(dist < threshold):
        w = lg.walk(pred, int(k))
        sig = tuple((a, m) for a, m, _, _ in w)
        if sig in seen_walks:
            continue
        seen_walks.add(sig)
        res.below_threshold += 1
        found = []
        for gamma, _F in walk_loops(inst, w):
            c = separate_fixed_cycle(inst, gamma, x, tol=tol, check_simple=False)
            if c is not None:
                found.append(c)
        if not found:
            res.fallback_used = True
            log.warning("alpha=%d: walk below threshold without a violated loop, searching its support", alpha)
            for gamma in _cycles_on_support(inst, {a for a, _, _, _ in w}):
                c = separate_fixed_cycle(inst, gamma, x, tol=tol, check_simple=False)
                if c is not None:
                    found.append(c)
        cuts.extend(found)
    res.cuts = _dedup_sorted(cuts, x)
    return res


def next_alpha(alpha: int, T: int, ascending: bool = False) -> int:
    """The sweep order: decrease, wrapping from 1 back to floor(T/2) (or the mirror image)."""
    if ascending:
        return alpha + 1 if alpha < T // 2 else 1
    return alpha - 1 if alpha >= 2 else T // 2


@dataclass
class SeparationOutcome:
    kind: str                                   # "InClosure", "Cuts" or "Incomplete"
    cuts: list[FlipCut] = field(default_factory=list)
    violations: list[float] = field(default_factory=list)
    certificate: dict[int, float] = field(default_factory=dict)
    alpha: Optional[int] = None                 # alpha where cuts were found
    resume_alpha: Optional[int] = None          # where the next sweep should start
    fallback_used: bool = False

    @property
    def in_closure(self) -> bool:
        return self.kind == "InClosure"


def exact_certify(inst: PespInstance, x: Mapping[int, Number], start: Optional[int] = None,
                  threads: int = 1, ascending: bool = False,
                  deadline: Optional[float] = None) -> SeparationOutcome:
    """Sweep alpha starting at ``start`` (default floor(T/2)) until an alpha produces cuts.

    If a full round of alpha values yields nothing, x lies in the split
    closure and the per-alpha minimum walk costs are returned as certificate.
    ``deadline`` is a ``time.perf_counter`` value; passing it ends the sweep
    early with kind "Incomplete".
    """
    T = inst.period
    top = T // 2
    default = 1 if ascending else top
    a0 = default if start is None or not 1 <= start <= top else start
    order = [a0]
    while len(order) < top:
        order.append(next_alpha(order[-1], T, ascending))
    cert: dict[int, float] = {}
    fallback = False

    def finish(res: AlphaResult) -> SeparationOutcome:
        return SeparationOutcome("Cuts", res.cuts, [float(violation(c, x)) for c in res.cuts],
                                 cert, res.alpha, next_alpha(res.alpha, T, ascending),
                                 fallback or res.fallback_used)

    if threads > 1 and len(order) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: exact_separate_alpha(inst, x, a), order))
        for res in results:
            cert[res.alpha] = res.min_cost
            fallback |= res.fallback_used
            if res.cuts:
                return finish(res)
    else:
        for a in order:
            if deadline is not None and time.perf_counter() >= deadline:
                return SeparationOutcome("Incomplete", [], [], cert, None, a, fallback)
            res = exact_separate_alpha(inst, x, a)
            cert[a] = res.min_cost
            fallback |= res.fallback_used
            if res.cuts:
                return finish(res)
    return SeparationOutcome("InClosure", [], [], cert, None, a0, fallback)


def certificate_ok(inst: PespInstance, cert: Mapping[int, float]) -> bool:
    T = inst.period
    return all(cert.get(a, -math.inf) >= a * (T - a) - CERT_TOL for a in range(1, T // 2 + 1))


def exhaustive_separate(inst: PespInstance, x: Mapping[int, Number], tol: float = VIOLATION_TOL,
                        limit: int = 10_000) -> list[FlipCut]:
    """Fixed-cycle separation over every simple cycle; exact but exponential in general."""
    cuts = []
    for gamma in simple_cycles(inst, limit=limit):
        c = separate_fixed_cycle(inst, gamma, x, tol=tol, check_simple=False)
        if c is not None:
            cuts.append(c)
    return _dedup_sorted(cuts, x)


__all__ = [
    "VIOLATION_TOL", "best_flip_set", "separate_fixed_cycle", "heuristic_separate", "LayeredGraph",
    "walk_loops", "exact_separate_alpha", "AlphaResult", "exact_certify", "SeparationOutcome",
    "next_alpha", "certificate_ok", "exhaustive_separate", "TrivialCutError",
]
