"""Cycle, change-cycle and flip inequalities, and their split-cut multipliers.

All construction is done in exact rational arithmetic. A cut is stored in
tension space as ``sum_a coef_a x_a >= rhs``; the integer cycle offsets are
eliminated through ``Gamma x = T z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .cycles import CycleBasis, OrientedCycle
from .instance import InstanceError, Number, PespInstance


class TrivialCutError(ValueError):
    """Raised for (gamma, F) with alpha = 0; such flip inequalities hold on the whole box."""


def _mod(v: int, T: int) -> int:
    return v % T


def alpha(inst: PespInstance, gamma: Mapping[int, int], flipped: Iterable[int] = ()) -> int:
    """The residue ``[-sum_{A\\F} gamma_a l_a - sum_F gamma_a u_a]_T``."""
    flip = set(flipped)
    acc = 0
    for a_id, g in gamma.items():
        a = inst.arc(a_id)
        acc -= g * (a.upper if a_id in flip else a.lower)
    return _mod(acc, inst.period)


@dataclass(frozen=True)
class FlipCut:
    coefficients: dict[int, Fraction]
    rhs: Fraction
    gamma: OrientedCycle
    flipped: frozenset[int]
    alpha: int

    @property
    def key(self) -> tuple:
        """Canonical provenance; (gamma, F) and (-gamma, F) map to the same key."""
        return (self.gamma.entries, tuple(sorted(self.flipped)))

    def lhs(self, x: Mapping[int, Number]) -> Number:
        return sum((c * x[a] for a, c in self.coefficients.items()), 0)

    def normalized_key(self) -> tuple:
        """Coefficients and rhs scaled to a primitive integer vector, for scale-free dedup."""
        vals = [*self.coefficients.values(), self.rhs]
        den = 1
        for v in vals:
            den = den * v.denominator // math.gcd(den, v.denominator)
        ints = [int(v * den) for v in vals]
        g = 0
        for v in ints:
            g = math.gcd(g, v)
        g = g or 1
        coef = tuple(sorted((a, int(c * den) // g) for a, c in self.coefficients.items() if c))
        return coef, int(self.rhs * den) // g

    def to_json(self) -> dict:
        return {
            "gamma": [[a, v] for a, v in self.gamma.entries],
            "F": sorted(self.flipped),
            "alpha": self.alpha,
            "coefficients": [[a, str(c)] for a, c in sorted(self.coefficients.items())],
            "rhs": str(self.rhs),
        }

    @classmethod
    def from_json(cls, data: dict) -> "FlipCut":
        return cls(
            coefficients={int(a): Fraction(c) for a, c in data["coefficients"]},
            rhs=Fraction(data["rhs"]),
            gamma=OrientedCycle((int(a), int(v)) for a, v in data["gamma"]),
            flipped=frozenset(int(a) for a in data["F"]),
            alpha=int(data["alpha"]),
        )


def canonical_provenance(inst: PespInstance, gamma: Mapping[int, int], flipped: Iterable[int]
                         ) -> tuple[OrientedCycle, frozenset[int], int]:
    """Pick the representative of {(gamma, F), (-gamma, F)} with alpha <= T/2.

    Flipped arcs outside the support of gamma are dropped since they do not
    enter the inequality. At alpha = T/2 the orientation with a forward lowest
    arc wins.
    """
    g = OrientedCycle(gamma)
    support = set(g.support)
    F = frozenset(a for a in flipped if a in support)
    a_val = alpha(inst, g, F)
    T = inst.period
    if a_val == 0:
        return g.canonical(), F, 0
    if 2 * a_val > T:
        return -g, F, T - a_val
    if 2 * a_val == T:
        return g.canonical(), F, a_val
    return g, F, a_val


def flip_cut(inst: PespInstance, gamma: Mapping[int, int], flipped: Iterable[int] = ()) -> FlipCut:
    """The flip inequality of (gamma, F) in tension space.

    With ``ref_a = u_a`` on flipped and ``l_a`` on other arcs the inequality
    reads ``sum_a c_a (x_a - ref_a) >= alpha (T - alpha)``; the constant is
    folded into the rhs. ``F = {}`` gives the change-cycle inequality.
    """
    g, F, a_val = canonical_provenance(inst, gamma, flipped)
    if a_val == 0:
        raise TrivialCutError("alpha is 0, the flip inequality is trivial")
    T = inst.period
    coef: dict[int, Fraction] = {}
    rhs = Fraction(a_val * (T - a_val))
    for a_id, v in g.entries:
        a = inst.arc(a_id)
        if a_id in F:
            c = -a_val * v if v > 0 else (T - a_val) * v
            ref = a.upper
        else:
            c = (T - a_val) * v if v > 0 else -a_val * v
            ref = a.lower
        coef[a_id] = Fraction(c)
        rhs += c * ref
    return FlipCut(coef, rhs, g, F, a_val)


def change_cycle_cut(inst: PespInstance, gamma: Mapping[int, int]) -> FlipCut:
    return flip_cut(inst, gamma, ())


def violation(cut: FlipCut, x: Mapping[int, Number]) -> Number:
    """``rhs - lhs(x)``; positive means the point violates the cut."""
    return cut.rhs - cut.lhs(x)


def cycle_bounds(inst: PespInstance, gamma: Mapping[int, int]) -> tuple[int, int]:
    """Integer bounds on ``gamma^T x / T`` from the box (cycle inequality)."""
    lo = hi = 0
    for a_id, v in gamma.items():
        a = inst.arc(a_id)
        if v > 0:
            lo += v * a.lower
            hi += v * a.upper
        else:
            lo += v * a.upper
            hi += v * a.lower
    T = inst.period
    return -((-lo) // T), hi // T


def chvatal_cuts(inst: PespInstance, gamma: Mapping[int, int]) -> list[FlipCut]:
    """Both cycle inequalities of gamma as flip cuts; trivial sides are omitted."""
    g = OrientedCycle(gamma)
    out = []
    for F in (g.backward, g.forward):
        try:
            out.append(flip_cut(inst, g, F))
        except TrivialCutError:
            pass
    return out


@dataclass(frozen=True)
class SplitMultiplier:
    """Multipliers on the row blocks (Gamma x - T z <= 0, -Gamma x + T z <= 0, x <= u, -x <= -l)."""

    lam1: tuple[Fraction, ...]
    lam2: tuple[Fraction, ...]
    lam3: dict[int, Fraction]
    lam4: dict[int, Fraction]

    def rhs_value(self, inst: PespInstance) -> Fraction:
        """``lambda^T b`` (only the bound rows have a nonzero rhs)."""
        return (sum((v * inst.arc(a).upper for a, v in self.lam3.items()), Fraction(0))
                - sum((v * inst.arc(a).lower for a, v in self.lam4.items()), Fraction(0)))

    def check(self, inst: PespInstance, basis: CycleBasis) -> None:
        """Raise if lambda is not a valid split multiplier with the single-bound-row pattern."""
        T = inst.period
        diff = [a - b for a, b in zip(self.lam1, self.lam2)]
        cont: dict[int, Fraction] = {}
        for k, cyc in enumerate(basis.cycles):
            for a_id, v in cyc.entries:
                cont[a_id] = cont.get(a_id, Fraction(0)) + diff[k] * v
        for a_id in set(self.lam3) | set(self.lam4):
            cont[a_id] = cont.get(a_id, Fraction(0)) + self.lam3.get(a_id, 0) - self.lam4.get(a_id, 0)
        if any(v != 0 for v in cont.values()):
            raise ValueError("lambda^T A_C != 0")
        if any((-T * d).denominator != 1 for d in diff):
            raise ValueError("lambda^T A_I is not integral")
        if self.rhs_value(inst).denominator == 1:
            raise ValueError("lambda^T b is integral")
        for a_id in set(self.lam3) & set(self.lam4):
            if self.lam3[a_id] != 0 and self.lam4[a_id] != 0:
                raise ValueError(f"both bound multipliers nonzero on arc {a_id}")


def split_multiplier(inst: PespInstance, basis: CycleBasis, gamma: Mapping[int, int],
                     flipped: Iterable[int] = ()) -> SplitMultiplier:
    """The split multiplier whose split inequality is the flip inequality of (gamma, F).

    ``lam1 = eta / T`` where ``eta^T Gamma = gamma``; for a fundamental basis
    eta is read off the co-tree entries. ``lam3 = -gamma/T`` on F and
    ``lam4 = gamma/T`` off F.
    """
    T = inst.period
    g = OrientedCycle(gamma)
    support = set(g.support)
    F = {a for a in flipped if a in support}
    if alpha(inst, g, F) == 0:
        raise TrivialCutError("alpha is 0, no split multiplier exists")
    eta = basis.coordinates(g)
    if basis.combine(eta) != g:
        raise InstanceError("gamma is not in the integer span of the basis")
    lam1 = tuple(Fraction(e, T) for e in eta)
    lam2 = tuple(Fraction(0) for _ in eta)
    lam3 = {a: Fraction(-v, T) for a, v in g.entries if a in F}
    lam4 = {a: Fraction(v, T) for a, v in g.entries if a not in F}
    return SplitMultiplier(lam1, lam2, lam3, lam4)


def split_inequality(inst: PespInstance, basis: CycleBasis, lam: SplitMultiplier
                     ) -> tuple[dict[int, Fraction], Fraction]:
    """The split inequality of ``lam``, mapped to tension space.

    Builds ``lam_+^T s / f + lam_-^T s / (1 - f) >= 1`` over the slack
    ``s = b - A_C x - A_I z`` with ``f = [lam^T b]_1``, substitutes
    ``z = Gamma x / T`` and returns ``(coef, rhs)`` with ``coef^T x >= rhs``.
    """
    T = inst.period
    lb = lam.rhs_value(inst)
    f = lb - math.floor(lb)
    if f == 0:
        raise TrivialCutError("lambda^T b is integral")

    def weight(v: Fraction) -> Fraction:
        return v / f if v > 0 else (-v) / (1 - f)

    coef: dict[int, Fraction] = {}
    const = Fraction(0)  # the inequality is sum coef_a x_a + const >= 1, then moved to rhs
    zcoef = [Fraction(0)] * len(basis.cycles)

    def add(a_id: int, c: Fraction) -> None:
        coef[a_id] = coef.get(a_id, Fraction(0)) + c

    # row blocks 1/2: slack rows -Gamma_k x + T z_k and Gamma_k x - T z_k
    for k, cyc in enumerate(basis.cycles):
        for sign, lv in ((1, lam.lam1[k]), (-1, lam.lam2[k])):
            if lv == 0:
                continue
            wgt = weight(lv)
            for a_id, v in cyc.entries:
                add(a_id, -sign * wgt * v)
            zcoef[k] += sign * wgt * T
    for a_id, lv in lam.lam3.items():
        if lv != 0:
            wgt = weight(lv)
            add(a_id, -wgt)
            const += wgt * inst.arc(a_id).upper
    for a_id, lv in lam.lam4.items():
        if lv != 0:
            wgt = weight(lv)
            add(a_id, wgt)
            const -= wgt * inst.arc(a_id).lower
    for k, cyc in enumerate(basis.cycles):
        if zcoef[k]:
            for a_id, v in cyc.entries:
                add(a_id, zcoef[k] * v / T)
    return {a: c for a, c in coef.items() if c != 0}, 1 - const


def scaled_split_inequality(inst: PespInstance, basis: CycleBasis, lam: SplitMultiplier
                            ) -> tuple[dict[int, Fraction], Fraction]:
    """The split inequality multiplied by ``alpha (T - alpha)`` with ``alpha = T [lam^T b]_1``."""
    coef, rhs = split_inequality(inst, basis, lam)
    lb = lam.rhs_value(inst)
    a_val = inst.period * (lb - math.floor(lb))
    scale = a_val * (inst.period - a_val)
    return {a: c * scale for a, c in coef.items()}, rhs * scale
