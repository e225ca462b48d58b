import math

import numpy as np
import pytest
from scipy.integrate import quad

from critlab.builders import LatticeSpec, TreeSpec, build
from critlab.resolvent import (aitken, criticality_constant, green_dirichlet, green_exhaustion,
                               green_zero_limit, null_sequence_energy, residual,
                               tree_radial_operator)

WATSON_Z3 = 0.25273100985866  # G_0(0) on Z^3 for the unnormalised Laplacian


def plane_green(alpha, x1, x2):
    """Z^2 resolvent by a one-dimensional Fourier integral (independent oracle)."""
    def f(k):
        c = alpha + 4 - 2 * math.cos(k)
        s = math.sqrt(c * c - 4)
        return math.cos(k * x1) * ((c - s) / 2) ** abs(x2) / s
    return quad(f, 0, math.pi, epsabs=1e-14, epsrel=1e-12, limit=200)[0] / math.pi


def test_plane_resolvent_matches_fourier_oracle():
    t = green_dirichlet(build(LatticeSpec(2, 60)), alpha=1.0)
    g = t.graph
    for x in [(0, 0), (1, 0), (3, 2), (7, 0), (5, 5)]:
        k = g.index_of(np.array([x]))[0]
        assert t.values[k] == pytest.approx(plane_green(1.0, *x), rel=1e-9)


def test_dirichlet_residual_and_positivity():
    t = green_dirichlet(build(LatticeSpec(3, 8)), alpha=0.3)
    assert residual(t) <= 1e-12
    assert np.all(t.values[t.graph.interior] > 0)
    assert np.all(t.values[t.graph.boundary] == 0)


def test_tree_radial_reduction_matches_full_graph():
    full = green_dirichlet(build(TreeSpec(3, 8)), alpha=1.0)
    A, S = tree_radial_operator(3, 8, 1.0)
    e0 = np.zeros(len(S))
    e0[0] = 1
    radial = np.linalg.solve(A, e0)
    depth = full.graph.coords[:, 0]
    for k in range(8):
        np.testing.assert_allclose(full.values[depth == k], radial[k], rtol=1e-12)


def test_tree_resolvent_exact_root():
    # forward ratio solves (d-1) g^2 - (d+1) g + 1 = 0 at alpha = 1
    for d in (3, 4, 5):
        gr = ((d + 1) - math.sqrt((d + 1) ** 2 - 4 * (d - 1))) / (2 * (d - 1))
        A, S = tree_radial_operator(d, 25, 1.0)
        e0 = np.zeros(len(S))
        e0[0] = 1
        radial = np.linalg.solve(A, e0)
        assert radial[0] == pytest.approx(1 / (d + 1 - d * gr), rel=1e-12)
        assert radial[5] / radial[4] == pytest.approx(gr, rel=1e-10)
    t = green_exhaustion(TreeSpec(3, 4), alpha=1.0, core_radius=2, tol=1e-9)
    assert t.converged
    assert t.values[0] == pytest.approx(1 / (4 - 3 * (1 - 1 / math.sqrt(2))), rel=1e-8)


def test_exhaustion_line_closed_form():
    t = green_exhaustion(LatticeSpec(1, 5), alpha=1.0, core_radius=10, tol=1e-13)
    assert t.converged and not t.extrapolated
    assert t.values[t.root] == pytest.approx(1 / math.sqrt(5), rel=1e-12)


def test_exhaustion_cube_watson_constant():
    t = green_exhaustion(LatticeSpec(3, 5), alpha=0.0, core_radius=2, tol=1e-4, order=1.0)
    assert t.converged and t.extrapolated
    assert t.values[t.root] == pytest.approx(WATSON_Z3, abs=5e-4)
    assert residual(t) <= 1e-9


def test_exhaustion_recurrent_plane_diverges_logarithmically():
    t = green_exhaustion(LatticeSpec(2, 5), alpha=0.0, core_radius=2, tol=1e-6,
                         radius_cap=260, extrapolate=False)
    assert not t.converged
    assert t.meta["growth"]["value_vs_log_radius_slope"] == pytest.approx(1 / (2 * math.pi), rel=0.05)


@pytest.mark.slow
def test_zero_limit_cube():
    rep = green_zero_limit(LatticeSpec(3, 10), core_radius=2)
    assert rep.converged, rep.reason
    assert rep.exhaustion_mismatch <= 1e-6
    assert rep.root_values[-1] < rep.limit.values[rep.limit.root]


def test_zero_limit_line_does_not_converge():
    rep = green_zero_limit(LatticeSpec(1, 30), core_radius=2)
    # Dirichlet truncation makes G_0 finite, but the recurrent growth shows in the spectral gap
    assert rep.spectral_gap > 0


@pytest.mark.parametrize("spec", [LatticeSpec(1, 30), TreeSpec(3, 6), LatticeSpec(2, 12)])
def test_criticality_constant_is_inverse_root_value(spec):
    res = criticality_constant(spec, alpha=0.5, radii=[spec.radius])
    groot = green_dirichlet(build(spec), alpha=0.5).values
    root = build(spec).root
    assert res.constants[0] * groot[root] == pytest.approx(1, abs=1e-8)


def test_aitken_geometric():
    seq = [2 + 0.5**k for k in range(6)]
    assert aitken(seq) == pytest.approx(2, abs=1e-12)


def test_null_sequence_line_and_graph_route():
    for n, q in null_sequence_energy(1, "tent", [3, 7, 40]):
        assert q == pytest.approx(2 / n, abs=1e-14)
    g = build(LatticeSpec(2, 30))
    direct = null_sequence_energy(2, "log", [5])[0][1]
    on_graph = null_sequence_energy(2, "log", [5], graph=g)[0][1]
    assert on_graph == pytest.approx(direct, rel=1e-12)


def test_null_sequence_profile_must_fit():
    with pytest.raises(ValueError, match="not supported"):
        null_sequence_energy(2, "tent", [20], graph=build(LatticeSpec(2, 10)))
