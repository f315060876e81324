"""Split closure of the periodic timetabling problem: flip cuts, separation and a root-node cutting plane loop."""

from .instance import (Arc, DisconnectedError, InfeasibleError, InstanceError, NotPeriodicError,
                       PespError, PespInstance, preprocess)
from .cycles import OrientedCycle, fundamental_basis, min_spanning_tree, simple_cycles
from .inequalities import FlipCut, TrivialCutError, alpha, flip_cut, violation

__all__ = [
    "Arc", "DisconnectedError", "InfeasibleError", "InstanceError", "NotPeriodicError", "PespError",
    "PespInstance", "preprocess", "OrientedCycle", "fundamental_basis", "min_spanning_tree",
    "simple_cycles", "FlipCut", "TrivialCutError", "alpha", "flip_cut", "violation",
]
