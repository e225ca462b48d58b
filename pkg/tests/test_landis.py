import math

import numpy as np
import pytest

from critlab.builders import LatticeSpec, TreeSpec, build
from critlab.hardy import tree_ground_state
from critlab.landis import (
    AXIS_LAMBDA, MissingReference, Profile, apriori_trend, bounded_trend, canonical_theorem,
    check_apriori, check_theorem, decay_profile, sharpness_instance, tends_to_zero,
)
from critlab.resolvent import green_dirichlet


@pytest.fixture(scope="module")
def cube():
    g = build(LatticeSpec(3, 12))
    return g, green_dirichlet(g, alpha=1.0)


def prof(vals):
    r = np.arange(1, len(vals) + 1)
    return Profile(r, np.asarray(vals, float), (1, len(vals)))


def test_decision_rules():
    assert tends_to_zero(prof([4, 2, 1, 0.5])) == (True, "decaying")
    assert tends_to_zero(prof([1, 0.9, 0.8, 0.7]))[0] is False
    assert tends_to_zero(prof([1, 2, 3])) == (False, "nondecreasing")
    assert tends_to_zero(prof([0, 0, 0])) == (True, "zero")
    assert bounded_trend(prof([3, 2, 2.05]))[0] is True
    assert bounded_trend(prof([1, 2, 4]))[0] is False
    assert bounded_trend(prof([1, np.inf]))[0] is False


def test_axis_lambda():
    assert AXIS_LAMBDA == pytest.approx(0.962, abs=1e-3)


def test_theorem_aliases():
    assert canonical_theorem("4.1") == "lattice"
    assert canonical_theorem("tree") == "tree"
    with pytest.raises(ValueError):
        canonical_theorem("9.9")


def test_green_against_itself_is_flat(cube):
    g, t = cube
    p = decay_profile(g, t.values, t)
    assert np.allclose(p.values, 1.0, atol=1e-12)


def test_zero_solution_passes_lattice(cube):
    g, t = cube
    rep = check_theorem("lattice", g, np.zeros(g.n), np.ones(g.n))
    assert rep.violated == []
    assert not rep.red_flag


def test_fast_decay_passes_general(cube):
    g, t = cube
    u = t.values * 2.0 ** (-g.distance)
    rep = check_theorem("general", g, u, v=np.maximum(t.values, 1e-300), green1=t)
    assert rep.hypothesis("liminf").satisfied
    assert rep.hypothesis("apriori").satisfied
    assert rep.apriori_constant <= 1.0 + 1e-12


def test_l2_fails_on_green(cube):
    g, t = cube
    rep = check_theorem("l2", g, t.values, green1=t)
    assert "l2" in rep.violated


def test_missing_reference(cube):
    g, t = cube
    with pytest.raises(MissingReference):
        check_theorem("general", g, t.values, green1=t)
    with pytest.raises(MissingReference):
        check_theorem("green-root", g, t.values, green1=t)
    with pytest.raises(ValueError):
        check_theorem("lattice", g, np.zeros(3))


def test_tree_ground_state_misses_liminf():
    v, table = tree_ground_state(TreeSpec(3, 9))
    g = table.graph
    rep = check_theorem("tree", g, v)
    assert rep.hypothesis("apriori").satisfied
    assert rep.hypothesis("liminf").satisfied is False


def test_apriori_ratio():
    g = build(LatticeSpec(2, 10))
    v = 1.0 + g.distance
    assert check_apriori(g, v, g, v) == pytest.approx(1.0)
    grow = apriori_trend(g, v * (1 + g.distance), g, v)
    assert bounded_trend(grow)[0] is False


def test_sharpness_line():
    t = green_dirichlet(build(LatticeSpec(1, 80)), alpha=1.0)
    inst = sharpness_instance(t)
    assert inst.V[t.root] == pytest.approx(1 - math.sqrt(5), rel=1e-12)
    assert inst.residual < 1e-12
    assert np.max(inst.V) <= 1.0


def test_sharpness_tree():
    t = green_dirichlet(build(TreeSpec(3, 16)), alpha=1.0)
    q = 1 - 1 / math.sqrt(2)
    assert sharpness_instance(t).V[t.root] == pytest.approx(1 - (4 - 3 * q), rel=1e-9)


def test_sharpness_needs_alpha_one():
    t = green_dirichlet(build(LatticeSpec(1, 20)), alpha=0.5)
    with pytest.raises(ValueError):
        sharpness_instance(t)


def test_sharpness_flagged_on_lattice():
    g = build(LatticeSpec(1, 120))
    inst = sharpness_instance(green_dirichlet(g, alpha=1.0))
    rep = check_theorem("lattice", g, inst.u, inst.V)
    assert rep.violated == ["liminf"]
    assert rep.consistency["harmonic_residual"] < 1e-9
