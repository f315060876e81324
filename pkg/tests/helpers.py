"""Random instance generators for the test suite."""

from __future__ import annotations

import random
from fractions import Fraction

from pespsplit.instance import Arc, PespInstance, preprocess


def random_bounds(rng: random.Random, T: int, tight: float = 0.5) -> tuple[int, int]:
    lo = rng.randrange(T)
    if rng.random() < tight:
        span = rng.randint(0, max(0, T // 2))
    else:
        span = rng.randint(0, T - 1)
    return lo, lo + span


def feasible_bounds(rng: random.Random, T: int, diff: int, tight: float = 0.5) -> tuple[int, int]:
    """Bounds ``[l, u]`` admitting a tension congruent to diff modulo T."""
    lo = rng.randrange(T)
    need = (diff - lo) % T
    extra = rng.randint(0, max(0, T // 3)) if rng.random() < tight else rng.randint(0, T - 1)
    return lo, lo + min(T - 1, need + extra)


def random_instance(rng: random.Random, n_nodes: int, mu: int, T: int = 10,
                    wmax: int = 10, parallel: bool = True, name: str = "rand",
                    feasible: bool = True) -> PespInstance:
    """Random spanning tree plus ``mu`` extra arcs; preprocessed and connected.

    With ``feasible`` the bounds are drawn around a hidden random timetable.
    """
    nodes = list(range(1, n_nodes + 1))
    pi = {v: rng.randrange(T) for v in nodes}
    arcs = []
    aid = 1

    def new_arc(i, j):
        nonlocal aid
        if rng.random() < 0.5:
            i, j = j, i
        if feasible:
            lo, up = feasible_bounds(rng, T, pi[j] - pi[i])
        else:
            lo, up = random_bounds(rng, T)
        arcs.append(Arc(aid, i, j, lo, up, Fraction(rng.randint(0, wmax))))
        aid += 1

    for v in nodes[1:]:
        new_arc(rng.choice(nodes[: v - 1]), v)
    pairs = set((min(a.tail, a.head), max(a.tail, a.head)) for a in arcs)
    added = 0
    tries = 0
    while added < mu and tries < 1000:
        tries += 1
        i, j = rng.sample(nodes, 2) if n_nodes > 1 else (1, 1)
        key = (min(i, j), max(i, j))
        if key in pairs and not parallel:
            continue
        pairs.add(key)
        new_arc(i, j)
        added += 1
    return preprocess(PespInstance(tuple(nodes), tuple(arcs), T, Fraction(0), name))


def random_cactus(rng: random.Random, n_blocks: int, T: int = 10, max_cycle: int = 4) -> PespInstance:
    """Blocks with at most one cycle each, glued at vertices (cycles or bridges); feasible."""
    nodes = [1]
    pi = {1: rng.randrange(T)}
    arcs = []
    aid = 1

    def add(i, j):
        nonlocal aid
        pi.setdefault(i, rng.randrange(T))
        pi.setdefault(j, rng.randrange(T))
        if rng.random() < 0.5:
            i, j = j, i
        lo, up = feasible_bounds(rng, T, pi[j] - pi[i])
        arcs.append(Arc(aid, i, j, lo, up, Fraction(rng.randint(0, 10))))
        aid += 1

    for _ in range(n_blocks):
        anchor = rng.choice(nodes)
        if rng.random() < 0.25:
            v = len(nodes) + 1
            nodes.append(v)
            add(anchor, v)
            continue
        k = rng.randint(1, max_cycle - 1)
        cyc = [anchor]
        for _ in range(k):
            v = len(nodes) + 1
            nodes.append(v)
            cyc.append(v)
        cyc.append(anchor)
        for a, b in zip(cyc, cyc[1:]):
            add(a, b)
    return preprocess(PespInstance(tuple(nodes), tuple(arcs), T, Fraction(0), "cactus"))


def glue(inst1: PespInstance, inst2: PespInstance, bridge: bool = False, rng=None) -> PespInstance:
    """Join two instances at one vertex, or by a new bridge arc."""
    shift = max(inst1.nodes)
    id_shift = max(a.id for a in inst1.arcs)
    arcs = list(inst1.arcs)
    nodes = list(inst1.nodes)
    first2 = min(inst2.nodes)
    ren = {}
    for v in inst2.nodes:
        if v == first2 and not bridge:
            ren[v] = inst1.nodes[0]
        else:
            ren[v] = v + shift
            nodes.append(v + shift)
    for a in inst2.arcs:
        arcs.append(Arc(a.id + id_shift, ren[a.tail], ren[a.head], a.lower, a.upper, a.weight))
    if bridge:
        rng = rng or random.Random(0)
        lo, up = random_bounds(rng, inst1.period)  # a bridge never affects feasibility
        arcs.append(Arc(max(a.id for a in arcs) + 1, inst1.nodes[0], ren[first2], lo, up,
                        Fraction(rng.randint(0, 10))))
    return preprocess(PespInstance(tuple(nodes), tuple(arcs), inst1.period, Fraction(0), "glued"))


def random_point(rng: random.Random, inst: PespInstance, integral_share: float = 0.3) -> dict:
    """Random x in the box; some coordinates at bounds, some fractional."""
    x = {}
    for a in inst.arcs:
        p = rng.random()
        if p < integral_share / 2:
            x[a.id] = Fraction(a.lower)
        elif p < integral_share:
            x[a.id] = Fraction(a.upper)
        else:
            x[a.id] = a.lower + Fraction(rng.randint(0, 100), 100) * a.span
    return x


def enumerate_tensions(inst: PespInstance, max_timetables: int = 200_000):
    """All integer periodic tensions, via timetables with the first node fixed at 0.

    Since ``u < l + T`` each arc admits at most one tension value per
    timetable, so this lists every feasible integer point exactly.
    """
    import itertools

    T = inst.period
    nodes = list(inst.nodes)
    if T ** (len(nodes) - 1) > max_timetables:
        raise ValueError("too many timetables to enumerate")
    seen = set()
    out = []
    for rest in itertools.product(range(T), repeat=len(nodes) - 1):
        pi = dict(zip(nodes, (0, *rest)))
        x = {}
        for a in inst.arcs:
            v = a.lower + (pi[a.head] - pi[a.tail] - a.lower) % T
            if v > a.upper:
                break
            x[a.id] = v
        else:
            key = tuple(sorted(x.items()))
            if key not in seen:
                seen.add(key)
                out.append(x)
    return out


def enumerated_optimum(inst: PespInstance):
    xs = enumerate_tensions(inst)
    if not xs:
        return None, None
    best = min(xs, key=lambda x: sum(a.weight * x[a.id] for a in inst.arcs))
    return sum(a.weight * best[a.id] for a in inst.arcs) + inst.objective_offset, best
