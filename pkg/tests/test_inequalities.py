import itertools
import json
import random
from fractions import Fraction

import pytest

from helpers import enumerate_tensions, random_instance, random_point
from pespsplit.cycles import (OrientedCycle, cycle_value, fundamental_basis, min_spanning_tree,
                              simple_cycles, tree_from_arcs)
from pespsplit.inequalities import (FlipCut, TrivialCutError, alpha, change_cycle_cut, chvatal_cuts,
                                    cycle_bounds, flip_cut, scaled_split_inequality, split_inequality,
                                    split_multiplier, violation)
from pespsplit.instance import PespInstance
from pespsplit.samples import FIG1_TENSION, FIG1_TREE, fig1_raw, two_arc

GAMMA2 = OrientedCycle({2: 1, 5: 1, 9: 1, 10: 1})
TWO = OrientedCycle({1: 1, 2: -1})


def test_alpha_single_arc():
    inst = PespInstance.from_tuples([(1, 1, 2, 3, 5, 0), (2, 2, 1, 0, 9, 0)], 10)
    assert alpha(inst, {1: 1}) == 7


def test_alpha_gamma2():
    assert alpha(fig1_raw(), GAMMA2) == 8


def test_alpha_symmetry():
    rng = random.Random(0)
    for _ in range(100):
        inst = random_instance(rng, rng.randint(2, 5), rng.randint(1, 3))
        g = rng.choice(simple_cycles(inst))
        F = [a for a in g if rng.random() < 0.5]
        a = alpha(inst, g, F)
        if a:
            assert alpha(inst, -g, F) == inst.period - a


def test_flip_cut_two_arc_example():
    inst = two_arc()
    cut = flip_cut(inst, TWO, {1})
    assert cut.alpha == 1
    # (u1 - x1) + (x2 - l2) >= 9 expands to -x1 + x2 >= 0
    assert cut.coefficients == {1: -1, 2: 1}
    assert cut.rhs == 0
    assert violation(cut, {1: 2, 2: 0}) == 2


def test_flip_cut_trivial_raises():
    inst = two_arc()
    with pytest.raises(TrivialCutError):
        flip_cut(inst, TWO, ())


def test_flip_cut_outside_support_ignored():
    inst = fig1_raw()
    assert flip_cut(inst, GAMMA2, {1, 3, 7}) == flip_cut(inst, GAMMA2, ())


def test_flip_cut_rhs_consistency():
    rng = random.Random(1)
    for _ in range(100):
        inst = random_instance(rng, rng.randint(2, 5), rng.randint(1, 3))
        g = rng.choice(simple_cycles(inst))
        F = {a for a in g if rng.random() < 0.5}
        if alpha(inst, g, F) == 0:
            continue
        cut = flip_cut(inst, g, F)
        ref = {a.id: (a.upper if a.id in F else a.lower) for a in inst.arcs}
        T = inst.period
        assert cut.lhs(ref) + cut.alpha * (T - cut.alpha) == cut.rhs
        assert alpha(inst, cut.gamma, cut.flipped) == cut.alpha
        assert 2 * cut.alpha <= T


def test_orientation_symmetry():
    rng = random.Random(2)
    for _ in range(100):
        inst = random_instance(rng, rng.randint(2, 5), rng.randint(1, 3))
        g = rng.choice(simple_cycles(inst))
        F = {a for a in g if rng.random() < 0.5}
        if alpha(inst, g, F) == 0:
            continue
        c1, c2 = flip_cut(inst, g, F), flip_cut(inst, -g, F)
        assert c1 == c2 and c1.key == c2.key


def test_change_cycle_matches_expanded_form():
    inst = fig1_raw()
    cut = change_cycle_cut(inst, GAMMA2)
    # gamma2 -> canonical -gamma2 with alpha 2: 2 * sum (x_a - l_a) >= 16
    assert cut.alpha == 2
    assert cut.coefficients == {2: 2, 5: 2, 9: 2, 10: 2}
    assert cut.rhs == 16 + 2 * 12
    a = alpha(inst, GAMMA2)
    T = 10
    direct = {k: (T - a) * v if v > 0 else -a * v for k, v in GAMMA2.items()}
    assert {k: c * 1 for k, c in cut.coefficients.items()} == {k: Fraction(v) for k, v in direct.items()} or \
        flip_cut(inst, -GAMMA2, ()).coefficients == cut.coefficients


def test_violation_at_lower_point():
    inst = fig1_raw()
    cut = flip_cut(inst, GAMMA2, ())
    assert violation(cut, inst.lower_vector()) == cut.alpha * (10 - cut.alpha)


def test_cuts_valid_on_integer_points():
    rng = random.Random(3)
    for _ in range(15):
        inst = random_instance(rng, rng.randint(2, 4), rng.randint(1, 3), T=6)
        pts = enumerate_tensions(inst)
        for g in simple_cycles(inst):
            for k in range(len(g) + 1):
                for F in itertools.combinations(sorted(g), k):
                    if alpha(inst, g, F) == 0:
                        continue
                    cut = flip_cut(inst, g, F)
                    assert all(violation(cut, x) <= 0 for x in pts)


def test_cycle_bounds_gamma2():
    inst = fig1_raw()
    assert cycle_bounds(inst, GAMMA2) == (2, 3)
    assert cycle_bounds(inst, -GAMMA2) == (-3, -2)
    assert 2 <= cycle_value(GAMMA2, FIG1_TENSION) / 10 <= 3


def test_cycle_bounds_empty_slab():
    inst = PespInstance.from_tuples([(1, 1, 2, 2, 3, 0), (2, 2, 1, 2, 3, 0)], 10)
    lo, hi = cycle_bounds(inst, {1: 1, 2: 1})
    assert lo > hi


def test_chvatal_trivial_sides():
    inst = PespInstance.from_tuples([(1, 1, 2, 0, 5, 0), (2, 2, 1, 0, 5, 0)], 10)
    assert chvatal_cuts(inst, {1: 1, 2: 1}) == []


def test_chvatal_gamma2_matches_bounds():
    inst = fig1_raw()
    cuts = chvatal_cuts(inst, GAMMA2)
    assert len(cuts) == 2
    lo, hi = cycle_bounds(inst, GAMMA2)
    # on the slab boundary every chvatal cut is satisfied; just beyond, one fails
    rng = random.Random(4)
    for _ in range(200):
        x = random_point(rng, inst)
        val = cycle_value(GAMMA2, x)
        ok = all(violation(c, x) <= 0 for c in cuts)
        assert ok == (lo * 10 <= val <= hi * 10)


def test_chvatal_consistency_random():
    rng = random.Random(5)
    for _ in range(100):
        inst = random_instance(rng, rng.randint(2, 5), rng.randint(1, 3))
        g = rng.choice(simple_cycles(inst))
        lo, hi = cycle_bounds(inst, g)
        T = inst.period
        for c in chvatal_cuts(inst, g):
            s = {a: Fraction(v) / c.coefficients[a] for a, v in g.items()}
            scale = set(s.values())
            assert len(scale) == 1  # the cut is a multiple of gamma^T x
            k = scale.pop()
            bound = c.rhs * k
            if k > 0:
                assert bound == T * lo
            else:
                assert bound == T * hi


def test_chvatal_valid_on_two_arc_points():
    inst = two_arc()
    pts = enumerate_tensions(inst)
    for c in chvatal_cuts(inst, TWO):
        assert all(violation(c, x) <= 0 for x in pts)


def test_split_multiplier_basis_cycle():
    inst = fig1_raw()
    basis = fundamental_basis(inst, tree_from_arcs(inst, FIG1_TREE))
    lam = split_multiplier(inst, basis, basis.cycles[1], ())
    assert lam.lam1 == (0, Fraction(1, 10), 0)
    assert all(v == 0 for v in lam.lam2)
    lam.check(inst, basis)


def test_split_multiplier_two_arc():
    inst = two_arc()
    basis = fundamental_basis(inst, min_spanning_tree(inst))
    lam = split_multiplier(inst, basis, TWO, {1})
    assert lam.rhs_value(inst) == Fraction(1, 10) or lam.rhs_value(inst) % 1 == Fraction(1, 10)
    lam.check(inst, basis)
    with pytest.raises(TrivialCutError):
        split_multiplier(inst, basis, TWO, ())


def test_split_roundtrip_random():
    rng = random.Random(6)
    done = 0
    while done < 200:
        inst = random_instance(rng, rng.randint(2, 6), rng.randint(1, 5))
        basis = fundamental_basis(inst, min_spanning_tree(inst, {a.id: rng.random() for a in inst.arcs}))
        g = rng.choice(simple_cycles(inst))
        F = {a for a in g if rng.random() < 0.5}
        if alpha(inst, g, F) == 0:
            continue
        lam = split_multiplier(inst, basis, g, F)
        lam.check(inst, basis)
        T = inst.period
        frac = lam.rhs_value(inst) - (lam.rhs_value(inst).numerator // lam.rhs_value(inst).denominator)
        assert T * frac == alpha(inst, g, F)
        coef, rhs = scaled_split_inequality(inst, basis, lam)
        cut = flip_cut(inst, g, F)
        assert coef == {a: c for a, c in cut.coefficients.items() if c}
        assert rhs == cut.rhs
        done += 1


def test_split_inequality_unscaled_has_rhs_one_form():
    inst = two_arc()
    basis = fundamental_basis(inst, min_spanning_tree(inst))
    coef, rhs = split_inequality(inst, basis, split_multiplier(inst, basis, TWO, {1}))
    # dividing the flip cut by alpha (T - alpha) = 9
    assert coef == {1: Fraction(-1, 9), 2: Fraction(1, 9)} and rhs == 0


def test_json_roundtrip():
    cut = flip_cut(fig1_raw(), GAMMA2, {2, 9})
    data = json.loads(json.dumps(cut.to_json()))
    assert set(data) == {"gamma", "F", "alpha", "coefficients", "rhs"}
    assert FlipCut.from_json(data) == cut


def test_normalized_key_is_scale_free():
    cut = flip_cut(fig1_raw(), GAMMA2, ())
    scaled = FlipCut({a: 3 * c for a, c in cut.coefficients.items()}, 3 * cut.rhs, cut.gamma, cut.flipped, cut.alpha)
    assert scaled.normalized_key() == cut.normalized_key()


def test_simple_cycle_sufficiency_tiny():
    """If all simple-cycle flip cuts hold at x, random cycle-space elements give no violated cut."""
    from pespsplit.oracle import split_closure
    rng = random.Random(7)
    for _ in range(5):
        inst = random_instance(rng, rng.randint(3, 4), rng.randint(2, 3), T=7)
        res = split_closure(inst)
        x = res.x
        basis = fundamental_basis(inst, min_spanning_tree(inst))
        for _ in range(100):
            g = basis.combine([rng.randint(-2, 2) for _ in basis.cycles])
            if not g:
                continue
            F = {a for a in g if rng.random() < 0.5}
            if alpha(inst, g, F) == 0:
                continue
            assert violation(flip_cut(inst, g, F), x) <= 0
