"""Spanning trees, fundamental cycle bases and oriented cycles of a PESP digraph."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .instance import DisconnectedError, InstanceError, Number, PespInstance, weak_components


class CycleLimitExceeded(InstanceError):
    pass


class OrientedCycle(Mapping[int, int]):
    """Sparse integer vector over arcs, typically an element of the cycle space.

    Behaves as a read-only mapping ``arc id -> coefficient`` without zero
    entries; hashable and compared by value.
    """

    __slots__ = ("_entries", "_dict", "_hash")

    def __init__(self, entries: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        d: dict[int, int] = {}
        for a, v in items:
            d[a] = d.get(a, 0) + int(v)
        self._entries = tuple(sorted((a, v) for a, v in d.items() if v != 0))
        self._dict = dict(self._entries)
        self._hash = hash(self._entries)

    def __getitem__(self, arc_id: int) -> int:
        return self._dict[arc_id]

    def get(self, arc_id, default=0):
        return self._dict.get(arc_id, default)

    def __iter__(self) -> Iterator[int]:
        return iter(self._dict)

    def __len__(self) -> int:
        return len(self._entries)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, OrientedCycle):
            return self._entries == other._entries
        return NotImplemented

    def __repr__(self) -> str:
        return f"OrientedCycle({dict(self._entries)})"

    def __neg__(self) -> "OrientedCycle":
        return OrientedCycle((a, -v) for a, v in self._entries)

    def __add__(self, other: "OrientedCycle") -> "OrientedCycle":
        return OrientedCycle([*self._entries, *other._entries])

    def __sub__(self, other: "OrientedCycle") -> "OrientedCycle":
        return self + (-other)

    def scaled(self, k: int) -> "OrientedCycle":
        return OrientedCycle((a, k * v) for a, v in self._entries)

    @property
    def entries(self) -> tuple[tuple[int, int], ...]:
        return self._entries

    @property
    def support(self) -> list[int]:
        return [a for a, _ in self._entries]

    @property
    def forward(self) -> list[int]:
        return [a for a, v in self._entries if v > 0]

    @property
    def backward(self) -> list[int]:
        return [a for a, v in self._entries if v < 0]

    def is_signed_unit(self) -> bool:
        return all(abs(v) == 1 for _, v in self._entries)

    def canonical(self) -> "OrientedCycle":
        """Orientation with a positive coefficient on the lowest arc id."""
        if self._entries and self._entries[0][1] < 0:
            return -self
        return self


@dataclass(frozen=True)
class SpanningTree:
    root: int
    arcs: frozenset[int]
    parent: dict[int, tuple[int, int] | None]  # node -> (parent node, arc id)
    depth: dict[int, int]


@dataclass(frozen=True)
class CycleBasis:
    tree: SpanningTree
    cotree: tuple[int, ...]
    cycles: tuple[OrientedCycle, ...]

    def __len__(self) -> int:
        return len(self.cycles)

    def coordinates(self, gamma: Mapping[int, int]) -> list[int]:
        """Integer coefficients eta with sum_k eta_k basis_k = gamma (co-tree entries of gamma)."""
        return [gamma.get(a, 0) for a in self.cotree]

    def combine(self, eta: Iterable[int]) -> OrientedCycle:
        acc: dict[int, int] = {}
        for k, cyc in zip(eta, self.cycles):
            if k:
                for a, v in cyc.entries:
                    acc[a] = acc.get(a, 0) + k * v
        return OrientedCycle(acc)


class _UnionFind:
    def __init__(self, items):
        self.parent = {v: v for v in items}

    def find(self, v):
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _tree_from_arcs(inst: PespInstance, tree_arcs: set[int], root: int) -> SpanningTree:
    adj: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for a_id in tree_arcs:
        a = inst.arc(a_id)
        adj[a.tail].append((a.head, a_id))
        adj[a.head].append((a.tail, a_id))
    parent: dict[int, tuple[int, int] | None] = {root: None}
    depth = {root: 0}
    queue = deque([root])
    while queue:
        i = queue.popleft()
        for j, a_id in sorted(adj[i], key=lambda t: t[1]):
            if j not in parent:
                parent[j] = (i, a_id)
                depth[j] = depth[i] + 1
                queue.append(j)
    return SpanningTree(root, frozenset(tree_arcs), parent, depth)


def min_spanning_tree(inst: PespInstance, arc_key: Mapping[int, Number] | None = None) -> SpanningTree:
    """Kruskal on the underlying undirected graph; ties broken by arc id.

    Without a key all arcs weigh the same, so the tree consists of the
    first arcs in id order that do not close a cycle.
    """
    comps = weak_components(inst)
    if len(comps) > 1:
        raise DisconnectedError(comps)
    key = (lambda a: (a.id,)) if arc_key is None else (lambda a: (arc_key[a.id], a.id))
    uf = _UnionFind(inst.nodes)
    chosen: set[int] = set()
    need = len(inst.nodes) - 1
    for a in sorted(inst.arcs, key=key):
        if len(chosen) == need:
            break
        if uf.union(a.tail, a.head):
            chosen.add(a.id)
    root = min(inst.nodes) if inst.nodes else 0
    return _tree_from_arcs(inst, chosen, root)


def tree_from_arcs(inst: PespInstance, tree_arcs: Iterable[int], root: int | None = None) -> SpanningTree:
    """Wrap a given arc set as a spanning tree, validating it."""
    arcs = set(tree_arcs)
    if len(arcs) != len(inst.nodes) - 1:
        raise InstanceError("a spanning tree needs |V| - 1 arcs")
    uf = _UnionFind(inst.nodes)
    for a_id in arcs:
        a = inst.arc(a_id)
        if not uf.union(a.tail, a.head):
            raise InstanceError("tree arcs contain a cycle")
    return _tree_from_arcs(inst, arcs, min(inst.nodes) if root is None else root)


def _tree_path(inst: PespInstance, tree: SpanningTree, start: int, end: int) -> dict[int, int]:
    """Signed arc entries of the tree path from ``start`` to ``end``."""
    entries: dict[int, int] = {}
    up_from_end = []
    i, j = start, end
    while tree.depth[i] > tree.depth[j]:
        p, a_id = tree.parent[i]
        entries[a_id] = 1 if inst.arc(a_id).tail == i else -1
        i = p
    while tree.depth[j] > tree.depth[i]:
        p, a_id = tree.parent[j]
        up_from_end.append((a_id, j))
        j = p
    while i != j:
        p, a_id = tree.parent[i]
        entries[a_id] = 1 if inst.arc(a_id).tail == i else -1
        i = p
        q, b_id = tree.parent[j]
        up_from_end.append((b_id, j))
        j = q
    for b_id, child in up_from_end:
        # traversed downward, from parent to child
        entries[b_id] = 1 if inst.arc(b_id).head == child else -1
    return entries


def fundamental_basis(inst: PespInstance, tree: SpanningTree) -> CycleBasis:
    """One fundamental cycle per co-tree arc, oriented so that arc has coefficient +1."""
    cotree = tuple(a.id for a in inst.arcs if a.id not in tree.arcs)
    cycles = []
    for a_id in cotree:
        a = inst.arc(a_id)
        entries = _tree_path(inst, tree, a.head, a.tail)
        entries[a_id] = 1
        cycles.append(OrientedCycle(entries))
    return CycleBasis(tree, cotree, tuple(cycles))


def is_circulation(inst: PespInstance, gamma: Mapping[int, int]) -> bool:
    balance: dict[int, int] = defaultdict(int)
    for a_id, v in gamma.items():
        if not inst.has_arc(a_id):
            return False
        a = inst.arc(a_id)
        balance[a.tail] += v
        balance[a.head] -= v
    return all(b == 0 for b in balance.values())


def cycle_value(gamma: Mapping[int, int], values: Mapping[int, Number]) -> Number:
    return sum((v * values[a] for a, v in gamma.items()), 0)


def is_simple_cycle(inst: PespInstance, gamma: Mapping[int, int]) -> bool:
    """True if gamma is a {-1,0,1} circulation whose support is one simple undirected cycle."""
    if not gamma or any(abs(v) != 1 for v in gamma.values()):
        return False
    if not is_circulation(inst, gamma):
        return False
    deg: dict[int, int] = defaultdict(int)
    adj: dict[int, list[int]] = defaultdict(list)
    for a_id in gamma:
        a = inst.arc(a_id)
        deg[a.tail] += 1
        deg[a.head] += 1
        adj[a.tail].append(a.head)
        adj[a.head].append(a.tail)
    if any(d != 2 for d in deg.values()):
        return False
    start = next(iter(deg))
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == len(deg)


def decompose(inst: PespInstance, gamma: Mapping[int, int]) -> list[OrientedCycle]:
    """Orientation-preserving decomposition of a circulation into simple oriented cycles.

    Backward arcs are reversed to obtain a nonnegative circulation ``g`` on an
    auxiliary digraph, from which directed cycles are peeled one at a time.
    The parts sum to gamma and never carry an arc against gamma's sign.
    """
    if not is_circulation(inst, gamma):
        raise InstanceError("decompose expects a circulation")
    # residual flow on the auxiliary digraph: node -> list of [arc id, target, remaining, sign]
    out_edges: dict[int, list[list]] = defaultdict(list)
    for a_id, v in sorted(gamma.items()):
        a = inst.arc(a_id)
        if v > 0:
            out_edges[a.tail].append([a_id, a.head, v, 1])
        else:
            out_edges[a.head].append([a_id, a.tail, -v, -1])
    pointer: dict[int, int] = defaultdict(int)

    def next_edge(v):
        lst = out_edges[v]
        while pointer[v] < len(lst) and lst[pointer[v]][2] == 0:
            pointer[v] += 1
        return lst[pointer[v]] if pointer[v] < len(lst) else None

    parts = []
    for start in sorted(out_edges):
        while next_edge(start) is not None:
            path_nodes = [start]
            path_edges: list[list] = []
            pos = {start: 0}
            v = start
            while True:
                e = next_edge(v)
                path_edges.append(e)
                v = e[1]
                if v in pos:
                    k = pos[v]
                    loop = path_edges[k:]
                    parts.append(OrientedCycle((ed[0], ed[3]) for ed in loop))
                    for ed in loop:
                        ed[2] -= 1
                    for node in path_nodes[k + 1:]:
                        del pos[node]
                    del path_nodes[k + 1:]
                    del path_edges[k:]
                    if not path_edges:
                        break
                    v = path_nodes[-1]
                    continue
                pos[v] = len(path_nodes)
                path_nodes.append(v)
    return parts


def simple_cycles(inst: PespInstance, limit: int = 10_000) -> list[OrientedCycle]:
    """All simple cycles of the underlying undirected multigraph.

    Each cycle is reported once, oriented so that its lowest arc id is
    forward. Raises :class:`CycleLimitExceeded` beyond ``limit`` cycles.
    """
    adj: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    for a in inst.arcs:
        adj[a.tail].append((a.head, a.id, 1))
        adj[a.head].append((a.tail, a.id, -1))
    for v in adj:
        adj[v].sort(key=lambda t: t[1])
    found: list[OrientedCycle] = []
    for a0 in sorted(inst.arcs, key=lambda a: a.id):
        target = a0.tail
        entries = {a0.id: 1}
        visited = {a0.head, a0.tail} if a0.tail != a0.head else {a0.tail}
        stack = [(a0.head, iter(adj[a0.head]))]
        trail: list[tuple[int, int]] = []  # (arc id, node entered)
        while stack:
            v, it = stack[-1]
            advanced = False
            for w, a_id, sign in it:
                if a_id <= a0.id:
                    continue
                if w == target:
                    entries[a_id] = sign
                    found.append(OrientedCycle(entries))
                    del entries[a_id]
                    if len(found) > limit:
                        raise CycleLimitExceeded(f"more than {limit} simple cycles")
                    continue
                if w in visited:
                    continue
                visited.add(w)
                entries[a_id] = sign
                trail.append((a_id, w))
                stack.append((w, iter(adj[w])))
                advanced = True
                break
            if not advanced:
                stack.pop()
                if trail:
                    a_id, w = trail.pop()
                    del entries[a_id]
                    visited.discard(w)
    return found
