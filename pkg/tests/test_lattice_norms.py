import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from critlab.builders import LatticeSpec, build_lattice
from critlab.lattice_norms import (
    a_from_alpha, asymptotic_fit, convexity_spot_check, log_asymptotic_resolvent, m_a,
    norm_a, norm_a_many, solve_r, solve_r_many, verify_norm_lemmas,
)
from critlab.resolvent import green_dirichlet


def brent_r(x, a):
    x = np.abs(np.asarray(x, float))
    f = lambda r: np.mean(np.sqrt(1 + (x * r) ** 2)) - (1 + a * a)
    return brentq(f, 0.0, x.size * (1 + a * a) / x.sum() + 1, xtol=1e-16, rtol=1e-15)


@pytest.mark.parametrize("d,a", [(1, 0.3), (2, 1e-4), (3, 1.0), (5, 2.5)])
def test_m_a_matches_acosh(d, a):
    assert m_a(d, a) == pytest.approx(math.acosh(1 + d * a * a), rel=1e-12)


def test_m_a_small_argument_stays_accurate():
    a = 1e-9
    assert m_a(3, a) == pytest.approx(math.sqrt(2 * 3) * a, rel=1e-9)


@pytest.mark.parametrize("x", [(1,), (3, 4), (1, 0, 7), (2, 2, 2, 9), (-5, 1, 0)])
@pytest.mark.parametrize("a", [0.2, 1.0, 3.0])
def test_root_matches_brent(x, a):
    assert solve_r(x, a=a) == pytest.approx(brent_r(x, a), rel=1e-12)


def test_vectorised_root_agrees_with_scalar():
    rng = np.random.default_rng(4)
    X = rng.integers(-20, 21, (200, 3))
    X = X[np.any(X != 0, axis=1)]
    r = solve_r_many(X, 0.7)
    assert np.allclose(r, [solve_r(x, a=0.7) for x in X], rtol=1e-13)


@pytest.mark.parametrize("d", [1, 2, 4])
def test_norm_on_axis_is_coordinate(d):
    for n in (1, 7, 40):
        x = np.zeros(d, int)
        x[-1] = -n
        assert norm_a(x, a=0.6).norm_a == pytest.approx(n, rel=1e-13)


def test_origin_has_zero_norm_and_no_asymptotic():
    ev = norm_a((0, 0), a=1.0)
    assert ev.norm_a == 0 and math.isnan(ev.log_asymptotic)
    with pytest.raises(ValueError):
        log_asymptotic_resolvent((0, 0), a=1.0)


def test_bad_arguments():
    with pytest.raises(ValueError):
        norm_a((1, 2), d=3)
    with pytest.raises(ValueError):
        solve_r((1, 2), a=0.0)
    with pytest.raises(ValueError):
        solve_r((0, 0), a=1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=5).filter(any),
       st.floats(0.01, 1.4))
def test_norm_bounds(x, a):
    X = np.array([x], float)
    n = norm_a_many(X, a)[0]
    eu, l1 = np.linalg.norm(X), np.abs(X).sum()
    d = len(x)
    assert eu * (1 - 1e-12) <= n <= l1 * (1 + 1e-12)
    assert m_a(d, a) * n <= math.sqrt(2 * a * a * d) * eu * (1 + 1e-12)


def test_triangle_inequality_spot_check():
    assert convexity_spot_check(3, 0.8, samples=2000) <= 1e-10


def test_lemma_sweep_small():
    rep = verify_norm_lemmas(d_max=3, radius=6)
    assert rep.violations == 0
    assert rep.axis_max_error < 1e-12
    assert len(rep.entries) == 3 * 4


def test_a_from_alpha():
    assert a_from_alpha(3, 6.0) == pytest.approx(1.0)
    assert a_from_alpha(2, 1.0) ** 2 == pytest.approx(1 / 4)


def test_asymptotic_fit_on_line_is_flat():
    # on Z^1 the leading term is exact away from the boundary
    t = green_dirichlet(build_lattice(LatticeSpec(1, 120)), alpha=1.0)
    rep = asymptotic_fit(t, ("axis",), window=(5, 40))
    assert rep.ray("axis").spread < 1e-10


def test_asymptotic_fit_requires_positive_alpha():
    t = green_dirichlet(build_lattice(LatticeSpec(1, 20)), alpha=0.0)
    with pytest.raises(ValueError):
        asymptotic_fit(t)
