"""Small hand-checkable instances used by tests, docs and the CLI self-check."""

from __future__ import annotations

from .instance import PespInstance

# node ids: A1..A4 -> 1..4, B1..B4 -> 5..8
FIG1_ARCS = [
    (1, 1, 2, 1, 2, 11),
    (2, 2, 3, 3, 6, 11),
    (3, 3, 4, 1, 2, 11),
    (4, 8, 7, 1, 2, 11),
    (5, 7, 6, 3, 6, 11),
    (6, 6, 5, 1, 2, 11),
    (7, 4, 8, 1, 10, 10),
    (8, 5, 1, 1, 10, 10),
    (9, 6, 2, 3, 12, 0),
    (10, 3, 7, 3, 12, 0),
]
FIG1_TIMETABLE = {1: 0, 2: 1, 3: 4, 4: 5, 5: 9, 6: 8, 7: 5, 8: 4}
FIG1_TENSION = {1: 1, 2: 3, 3: 1, 4: 1, 5: 3, 6: 1, 7: 9, 8: 1, 9: 3, 10: 11}
FIG1_TREE = (1, 2, 3, 7, 8, 9, 10)


def fig1_raw() -> PespInstance:
    """Two four-station lines in opposite directions with turnarounds and transfers, T = 10."""
    return PespInstance.from_tuples(FIG1_ARCS, 10, nodes=range(1, 9), name="fig1")


def two_arc(lower=(0, 0), upper=(9, 9), period: int = 10, weight=(1, 1)) -> PespInstance:
    """Two parallel arcs 1 -> 2; the cycle (+a1, -a2) is the only one."""
    return PespInstance.from_tuples(
        [(1, 1, 2, lower[0], upper[0], weight[0]), (2, 1, 2, lower[1], upper[1], weight[1])],
        period, name="two_arc")
