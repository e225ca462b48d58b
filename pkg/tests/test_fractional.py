import math

import numpy as np
import pytest
from scipy.special import gammaln

from critlab.fractional import (
    abs_gamma_neg, build_fractional_graph, expected_slope, fractional_weights, heat_kernel,
    heat_kernel_table,
)
from critlab.graph import apply_laplacian


def line_weight(n, sigma):
    # closed form of the 1-D subordinated weight
    lead = sigma * math.log(4) + math.lgamma(0.5 + sigma) - 0.5 * math.log(math.pi)
    return np.exp(lead + gammaln(n - sigma) - gammaln(n + 1 + sigma)) / abs_gamma_neg(sigma)


def test_heat_kernel_at_zero_time_is_delta():
    assert heat_kernel(2, 0.0, (0, 0)) == 1.0
    assert heat_kernel(2, 0.0, (1, 0)) == 0.0


def test_heat_kernel_value():
    assert heat_kernel(1, 0.5, (0,)) == pytest.approx(0.46575960759364043, rel=1e-14)


@pytest.mark.parametrize("t", [0.1, 2.0, 30.0])
def test_heat_kernel_mass_and_semigroup(t):
    p = heat_kernel_table(1, t, 400)
    assert p.sum() == pytest.approx(1.0, abs=1e-13)
    q = heat_kernel_table(1, 2 * t, 400)
    conv = np.convolve(p, p)[400:1201]
    assert np.max(np.abs(conv - q)) < 1e-10


def test_heat_kernel_rejects_bad_input():
    with pytest.raises(ValueError):
        heat_kernel(2, 1.0, (1,))
    with pytest.raises(ValueError):
        heat_kernel(1, -1.0, (1,))


@pytest.mark.parametrize("sigma", [0.25, 0.5, 0.75])
def test_line_weights_match_closed_form(sigma):
    fw = fractional_weights(1, sigma, 30)
    n = np.abs(fw.offsets[:, 0])
    assert np.allclose(fw.values, line_weight(n, sigma), rtol=1e-10, atol=0)
    assert fw.dual_agreement < 1e-9


def test_weights_symmetric_and_monotone():
    fw = fractional_weights(2, 0.5, 8)
    for z in [(1, 2), (3, 0), (5, 4)]:
        w = fw.weight(z)
        assert w > 0
        for s in [(-z[0], z[1]), (z[1], z[0]), (-z[1], -z[0])]:
            assert fw.weight(s) == pytest.approx(w, rel=1e-12)
    axis = [fw.weight((k, 0)) for k in range(1, 9)]
    assert np.all(np.diff(axis) < 0)
    assert fw.weight((0, 0)) == 0.0 and fw.weight((9, 0)) == 0.0


@pytest.mark.parametrize("d,sigma", [(1, 0.3), (2, 0.5)])
def test_weight_power_law(d, sigma):
    fw = fractional_weights(d, sigma, 30)
    n = np.arange(5, 31)
    w = [fw.weight((k,) + (0,) * (d - 1)) for k in n]
    slope = np.polyfit(np.log(n), np.log(w), 1)[0]
    assert slope == pytest.approx(-(d + 2 * sigma), rel=0.05)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        fractional_weights(1, 1.0, 5)
    with pytest.raises(ValueError):
        fractional_weights(1, 0.5, 0)
    assert expected_slope(3, 0.5, 0) == -2
    assert expected_slope(3, 0.5, 1) == -4


def test_graph_laplacian():
    fw = fractional_weights(2, 0.4, 3)
    g = build_fractional_graph(fw, 8)
    inner = g.interior
    assert np.allclose(g.degree[inner], fw.total_mass, rtol=1e-13)
    assert np.allclose(apply_laplacian(g, np.ones(g.n))[inner], 0.0, atol=1e-13)
    delta = np.zeros(g.n)
    delta[g.root] = 1.0
    assert apply_laplacian(g, delta)[g.root] == pytest.approx(fw.total_mass, rel=1e-13)


def test_graph_needs_interior():
    fw = fractional_weights(1, 0.5, 4)
    with pytest.raises(ValueError):
        build_fractional_graph(fw, 4)
