"""PESP instance model and instance-to-instance transformations."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping

Number = int | float | Fraction
Tension = dict[int, Number]
Timetable = dict[int, Number]


class PespError(Exception):
    """Base class for errors raised by this package."""


class InstanceError(PespError):
    """Malformed instance data or transformation arguments."""


class DisconnectedError(InstanceError):
    def __init__(self, components: list[list[int]]):
        self.components = components
        super().__init__(f"instance is not weakly connected: {len(components)} components")


class InfeasibleError(PespError):
    """The instance provably has no periodic tension."""


class NotPeriodicError(PespError):
    """A tension vector violates the cycle periodicity property."""


@dataclass(frozen=True)
class Arc:
    id: int
    tail: int
    head: int
    lower: int
    upper: int
    weight: Fraction = Fraction(0)

    @property
    def span(self) -> int:
        return self.upper - self.lower


@dataclass(frozen=True)
class PespInstance:
    """The tuple (G, T, l, u, w) plus the constant absorbed by preprocessing.

    Instances are immutable; every transformation returns a new one.
    """

    nodes: tuple[int, ...]
    arcs: tuple[Arc, ...]
    period: int
    objective_offset: Fraction = Fraction(0)
    name: str = ""
    _index: dict[int, int] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "objective_offset", Fraction(self.objective_offset))
        index = {}
        for k, a in enumerate(self.arcs):
            if a.id in index:
                raise InstanceError(f"duplicate arc id {a.id}")
            index[a.id] = k
        object.__setattr__(self, "_index", index)
        known = set(self.nodes)
        for a in self.arcs:
            if a.tail not in known or a.head not in known:
                raise InstanceError(f"arc {a.id} references an unknown node")

    @classmethod
    def from_tuples(cls, arcs: Iterable[tuple], period: int, nodes: Iterable[int] | None = None,
                    name: str = "") -> "PespInstance":
        """Build from ``(id, tail, head, lower, upper, weight)`` tuples."""
        arc_list = [Arc(int(i), int(t), int(h), int(lo), int(up), Fraction(w)) for i, t, h, lo, up, w in arcs]
        if nodes is None:
            seen: dict[int, None] = {}
            for a in arc_list:
                seen.setdefault(a.tail)
                seen.setdefault(a.head)
            nodes = sorted(seen)
        return cls(tuple(nodes), tuple(arc_list), int(period), Fraction(0), name)

    def arc(self, arc_id: int) -> Arc:
        try:
            return self.arcs[self._index[arc_id]]
        except KeyError:
            raise InstanceError(f"unknown arc id {arc_id}") from None

    def has_arc(self, arc_id: int) -> bool:
        return arc_id in self._index

    def position(self, arc_id: int) -> int:
        """Column index of an arc in vector representations."""
        return self._index[arc_id]

    @property
    def arc_ids(self) -> list[int]:
        return [a.id for a in self.arcs]

    @property
    def mu(self) -> int:
        """Cyclomatic number |A| - |V| + c (c = number of weakly connected components)."""
        return len(self.arcs) - len(self.nodes) + len(weak_components(self))

    def lower_vector(self) -> Tension:
        return {a.id: a.lower for a in self.arcs}

    def with_arcs(self, arcs: Iterable[Arc], nodes: Iterable[int] | None = None) -> "PespInstance":
        return replace(self, arcs=tuple(arcs), nodes=tuple(self.nodes if nodes is None else nodes))


def weak_components(inst: PespInstance) -> list[list[int]]:
    """Node lists of the weakly connected components, in node order."""
    adj: dict[int, list[int]] = defaultdict(list)
    for a in inst.arcs:
        adj[a.tail].append(a.head)
        adj[a.head].append(a.tail)
    seen: set[int] = set()
    comps = []
    for v in inst.nodes:
        if v in seen:
            continue
        seen.add(v)
        comp = [v]
        queue = deque([v])
        while queue:
            i = queue.popleft()
            for j in adj[i]:
                if j not in seen:
                    seen.add(j)
                    comp.append(j)
                    queue.append(j)
        comps.append(comp)
    return comps


def is_normalized(inst: PespInstance) -> bool:
    T = inst.period
    return all(a.tail != a.head and 0 <= a.lower < T and a.lower <= a.upper < a.lower + T
               for a in inst.arcs)


def preprocess(raw: PespInstance) -> PespInstance:
    """Normalize bounds to ``0 <= l < T`` and ``l <= u < l + T`` and drop loops.

    Loop arcs carry a tension of a multiple of T; the cheapest feasible one is
    charged to the objective offset. Bound shifts by multiples of T are charged
    the same way so that ``w^T x + offset`` keeps its meaning.
    """
    T = raw.period
    if T < 2:
        raise InstanceError(f"period must be at least 2, got {T}")
    offset = raw.objective_offset
    arcs = []
    for a in raw.arcs:
        if a.upper < a.lower:
            raise InstanceError(f"arc {a.id}: upper < lower")
        if a.tail == a.head:
            k_lo = -((-a.lower) // T)
            k_hi = a.upper // T
            if k_lo > k_hi:
                raise InfeasibleError(f"loop arc {a.id} admits no multiple of the period")
            k = k_lo if a.weight >= 0 else k_hi
            offset += a.weight * k * T
            continue
        shift = T * (a.lower // T)
        lo, up = a.lower - shift, a.upper - shift
        if up - lo >= T:
            up = lo + T - 1
        offset += a.weight * shift
        arcs.append(replace(a, lower=lo, upper=up))
    out = replace(raw, arcs=tuple(arcs), objective_offset=offset)
    comps = weak_components(out)
    if len(comps) > 1:
        raise DisconnectedError(comps)
    return out


def split_components(inst: PespInstance) -> list[PespInstance]:
    """One sub-instance per weakly connected component; the offset stays with the first."""
    comps = weak_components(inst)
    out = []
    for k, comp in enumerate(comps):
        members = set(comp)
        arcs = [a for a in inst.arcs if a.tail in members]
        out.append(replace(inst, nodes=tuple(comp), arcs=tuple(arcs),
                           objective_offset=inst.objective_offset if k == 0 else Fraction(0)))
    return out


def flip_arcs(inst: PespInstance, flipped: Iterable[int]) -> tuple[PespInstance, dict[int, int]]:
    """Reverse the arcs in ``flipped``, negating bounds and weights.

    Arc ids are kept, so the relabeling map is the identity on ids; it is
    returned for callers that track arcs across transformations.
    """
    flip = set(flipped)
    for a_id in flip:
        inst.arc(a_id)
    arcs = []
    for a in inst.arcs:
        if a.id in flip:
            arcs.append(Arc(a.id, a.head, a.tail, -a.upper, -a.lower, -a.weight))
        else:
            arcs.append(a)
    return inst.with_arcs(arcs), {a.id: a.id for a in inst.arcs}


def flip_tension(x: Mapping[int, Number], flipped: Iterable[int]) -> Tension:
    flip = set(flipped)
    return {a: (-v if a in flip else v) for a, v in x.items()}


def _fresh_node(inst: PespInstance) -> int:
    return max(inst.nodes, default=0) + 1


def _fresh_arc_id(inst: PespInstance, k: int = 1) -> int:
    return max((a.id for a in inst.arcs), default=0) + k


def free_augment(inst: PespInstance) -> tuple[PespInstance, int, dict[int, int]]:
    """Add a hub node s and free arcs (s, i) with bounds [0, T-1] and weight 0.

    Returns the augmented instance, the hub node and the map node -> new arc id.
    """
    s = _fresh_node(inst)
    base = _fresh_arc_id(inst)
    hub_arcs = {}
    arcs = list(inst.arcs)
    for k, v in enumerate(inst.nodes):
        hub_arcs[v] = base + k
        arcs.append(Arc(base + k, s, v, 0, inst.period - 1, Fraction(0)))
    return inst.with_arcs(arcs, nodes=(*inst.nodes, s)), s, hub_arcs


def augment_tension(inst: PespInstance, x: Mapping[int, Number], hub_arcs: Mapping[int, int]) -> Tension:
    """Extend a periodic tension to the free augmentation via its timetable."""
    pi = recover_timetable(inst, x)
    out = dict(x)
    for v, a_id in hub_arcs.items():
        out[a_id] = pi[v]
    return out


@dataclass(frozen=True)
class Subdivision:
    """Bookkeeping of a simple subdivision of ``original`` into ``first`` then ``second``."""

    original: Arc
    first: Arc
    second: Arc
    middle: int

    def sum_map(self, x: Mapping[int, Number]) -> Tension:
        """Project a tension of the subdivided instance back by adding the two parts."""
        out = {a: v for a, v in x.items() if a not in (self.first.id, self.second.id)}
        out[self.original.id] = x[self.first.id] + x[self.second.id]
        return out

    def spread_map(self, x: Mapping[int, Number]) -> Tension:
        """Distribute the original arc's tension proportionally over both parts."""
        a, a1, a2 = self.original, self.first, self.second
        t = x[a.id] - a.lower
        span = a.upper - a.lower
        out = {k: v for k, v in x.items() if k != a.id}
        out[a1.id] = a1.lower + Fraction(a1.upper - a1.lower, span) * t
        out[a2.id] = a2.lower + Fraction(a2.upper - a2.lower, span) * t
        return out


def subdivide(inst: PespInstance, arc_id: int, split: tuple[int, int, int, int]) -> tuple[PespInstance, Subdivision]:
    """Replace an arc by two arcs in series through a fresh node.

    ``split = (l1, u1, l2, u2)`` must satisfy ``0 <= l1 <= u1``, ``0 <= l2 <= u2``,
    ``l1 + l2 = l`` and ``u1 + u2 = u``. Both parts inherit the weight.
    """
    a = inst.arc(arc_id)
    l1, u1, l2, u2 = split
    if not a.lower < a.upper:
        raise InstanceError(f"arc {arc_id} has zero span and cannot be subdivided")
    if not (0 <= l1 <= u1 and 0 <= l2 <= u2 and l1 + l2 == a.lower and u1 + u2 == a.upper):
        raise InstanceError(f"invalid split {split} for arc {arc_id} with bounds [{a.lower}, {a.upper}]")
    mid = _fresh_node(inst)
    id1, id2 = _fresh_arc_id(inst, 1), _fresh_arc_id(inst, 2)
    a1 = Arc(id1, a.tail, mid, l1, u1, a.weight)
    a2 = Arc(id2, mid, a.head, l2, u2, a.weight)
    arcs = []
    for b in inst.arcs:
        if b.id == arc_id:
            arcs.extend((a1, a2))
        else:
            arcs.append(b)
    return inst.with_arcs(arcs, nodes=(*inst.nodes, mid)), Subdivision(a, a1, a2, mid)


def binarize(inst: PespInstance) -> tuple[PespInstance, list[Subdivision]]:
    """Subdivide every arc with ``u > T`` once so that all upper bounds are at most T.

    Split rule: halve both bounds, rounding up on the first part
    (``l1 = ceil(l/2)``, ``u1 = ceil(u/2)``). Since ``T < u < l + T`` implies
    ``u >= l + 2``, both parts keep a positive span and ``u_i <= T``.
    """
    T = inst.period
    out = inst
    subs = []
    for a in inst.arcs:
        if a.upper <= T:
            continue
        l1, u1 = -(-a.lower // 2), -(-a.upper // 2)
        out, sub = subdivide(out, a.id, (l1, u1, a.lower - l1, a.upper - u1))
        subs.append(sub)
    return out, subs


def bridges(inst: PespInstance) -> set[int]:
    return {blk[0] for blk in biconnected_blocks(inst) if len(blk) == 1}


def biconnected_blocks(inst: PespInstance) -> list[list[int]]:
    """Arc-id lists of the blocks of the underlying undirected multigraph.

    Iterative Tarjan; parallel arcs are distinguished by arc id, so a pair of
    parallel arcs forms a block of its own rather than two bridges.
    """
    adj: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for a in inst.arcs:
        adj[a.tail].append((a.head, a.id))
        adj[a.head].append((a.tail, a.id))
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    blocks: list[list[int]] = []
    counter = 0
    for root in inst.nodes:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, None, iter(adj[root]))]
        edge_stack: list[int] = []
        while stack:
            v, parent_arc, it = stack[-1]
            advanced = False
            for w, a_id in it:
                if a_id == parent_arc:
                    continue
                if w not in disc:
                    disc[w] = low[w] = counter
                    counter += 1
                    edge_stack.append(a_id)
                    stack.append((w, a_id, iter(adj[w])))
                    advanced = True
                    break
                if disc[w] < disc[v]:
                    edge_stack.append(a_id)
                    low[v] = min(low[v], disc[w])
            if advanced:
                continue
            stack.pop()
            if stack:
                u = stack[-1][0]
                low[u] = min(low[u], low[v])
                if low[v] >= disc[u]:
                    block = []
                    while True:
                        e = edge_stack.pop()
                        block.append(e)
                        if e == parent_arc:
                            break
                    blocks.append(sorted(block))
    blocks.sort(key=lambda b: b[0])
    return blocks


def restrict_to_mu(inst: PespInstance, target_mu: int) -> PespInstance:
    """Delete arcs of largest span (ties: lowest weight, then lowest id) until mu = target.

    Bridges are skipped, so the graph stays connected and every deletion
    lowers mu by one. Since bridges stay bridges when arcs are deleted, one
    pass over the arcs in priority order realizes the greedy rule.
    """
    if target_mu < 0:
        raise InstanceError("target mu must be non-negative")
    mu = inst.mu
    if target_mu > mu:
        raise InstanceError(f"target mu {target_mu} exceeds current mu {mu}")
    order = sorted(inst.arcs, key=lambda a: (-a.span, a.weight, a.id))
    current = inst
    bridge_set = bridges(current)
    for a in order:
        if mu == target_mu:
            break
        if a.id in bridge_set:
            continue
        current = current.with_arcs([b for b in current.arcs if b.id != a.id])
        mu -= 1
        bridge_set = bridges(current)
    return current


def evaluate_objective(inst: PespInstance, x: Mapping[int, Number], tol: float = 1e-9) -> tuple[Number, Number]:
    """Return ``(w^T x + offset, w^T (x - l))``."""
    wx: Number = 0
    slack: Number = 0
    for a in inst.arcs:
        v = x[a.id]
        if v < a.lower - tol or v > a.upper + tol:
            raise InstanceError(f"tension on arc {a.id} is {v}, outside [{a.lower}, {a.upper}]")
        wx += a.weight * v
        slack += a.weight * (v - a.lower)
    return wx + inst.objective_offset, slack


def _mod(v: Number, T: int) -> Number:
    if isinstance(v, float):
        return math.fmod(math.fmod(v, T) + T, T)
    return v % T


def recover_timetable(inst: PespInstance, x: Mapping[int, Number], root: int | None = None,
                      tol: float = 1e-6) -> Timetable:
    """Recover a periodic timetable from a periodic tension by graph traversal."""
    T = inst.period
    adj: dict[int, list[tuple[int, Arc]]] = defaultdict(list)
    for a in inst.arcs:
        adj[a.tail].append((a.head, a))
        adj[a.head].append((a.tail, a))
    pi: dict[int, Number] = {}
    used: set[int] = set()
    roots = [root] if root is not None else []
    roots += [v for v in inst.nodes if v != root]
    for r in roots:
        if r in pi:
            continue
        pi[r] = 0
        queue = deque([r])
        while queue:
            i = queue.popleft()
            for j, a in adj[i]:
                if j in pi:
                    continue
                used.add(a.id)
                step = x[a.id] if a.tail == i else -x[a.id]
                pi[j] = _mod(pi[i] + step, T)
                queue.append(j)
    for a in inst.arcs:
        if a.id in used:
            continue
        r = _mod(pi[a.head] - pi[a.tail] - x[a.id], T)
        if min(r, T - r) > tol:
            raise NotPeriodicError(f"not a periodic tension: arc {a.id} is off by {r} modulo {T}")
    return pi
