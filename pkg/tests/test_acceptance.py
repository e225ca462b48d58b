"""Acceptance suite: one test per criterion.

Each test gathers every sub-check of its criterion, prints the measured
numbers, and fails with the full list of unmet sub-checks.
"""
import math
import time

import numpy as np
import pytest

from critlab.builders import LatticeSpec, TreeSpec, axis_points, build
from critlab.fractional import fractional_green_slopes, fractional_weights
from critlab.graph import (WeightedGraph, apply_schrodinger, green_pairing,
                           ground_state_transform_check, pointwise_max, subharmonic_sample)
from critlab.hardy import supersolution_hardy
from critlab.landis import check_theorem, sharpness_instance
from critlab.lattice_norms import asymptotic_fit, m_a, verify_norm_lemmas
from critlab.resolvent import (criticality_constant, green_dirichlet, green_exhaustion,
                               null_sequence_energy)

from .helpers import random_instance

LAM = (3 - math.sqrt(5)) / 2


class Checks:
    def __init__(self, title):
        self.title, self.failed = title, []

    def __call__(self, name, ok, detail=""):
        print(f"  [{'PASS' if ok else 'FAIL'}] {name} {detail}")
        if not ok:
            self.failed.append(f"{name} {detail}")

    def done(self):
        assert not self.failed, f"{self.title}: " + "; ".join(self.failed)


def _on_axis(table, n):
    g = table.graph
    return table.values[g.index_of(axis_points(g.coords.shape[1], n) + g.coords[g.root])]


def test_criterion_01_line_resolvent_closed_form():
    c = Checks("line resolvent")
    t0 = time.perf_counter()
    table = green_dirichlet(build(LatticeSpec(1, 200)), alpha=1.0)
    g = table.graph
    x = g.coords[:, 0]
    sel = np.abs(x) <= 50
    err = np.max(np.abs(table.values[sel] - LAM ** np.abs(x[sel]) / math.sqrt(5)))
    elapsed = time.perf_counter() - t0
    c("closed form |x|<=50", err <= 1e-8, f"max err {err:.3g}")
    c("runtime < 5 s", elapsed < 5, f"{elapsed:.2f} s")
    c.done()


def test_criterion_02_tree_closed_form():
    c = Checks("tree resolvent")
    t0 = time.perf_counter()
    table = green_dirichlet(build(TreeSpec(3, 20)), alpha=1.0)
    elapsed = time.perf_counter() - t0
    depth = table.graph.coords[:, 0]
    sel = depth <= 10
    err = np.max(np.abs(table.values[sel] - 3.0 ** -depth[sel] / 3))
    c("(1/3) 3^-|x| for |x|<=10", err <= 1e-8,
      f"max err {err:.3g}, G_1(o)={table.values[0]:.6f}")
    for d in (3, 4, 5):
        t = green_dirichlet(build(TreeSpec(d, 9)), alpha=1.0)
        dep = t.graph.coords[:, 0]
        ratio = t.values[np.flatnonzero(dep == 2)[0]] / t.values[np.flatnonzero(dep == 1)[0]]
        c(f"forward ratio = 1/d, d={d}", abs(ratio - 1 / d) <= 1e-12, f"ratio {ratio:.12f}")
    c("runtime < 10 s", elapsed < 10, f"{elapsed:.2f} s")
    c.done()


def test_criterion_03_norm_lemma_sweep():
    c = Checks("norm lemmas")
    t0 = time.perf_counter()
    rep = verify_norm_lemmas(d_max=4, radius=20)
    elapsed = time.perf_counter() - t0
    c("zero violations", rep.violations == 0, f"{rep.violations}")
    c("axis identity", rep.axis_max_error <= 1e-12, f"max err {rep.axis_max_error:.3g}")
    c("runtime < 60 s", elapsed < 60, f"{elapsed:.1f} s")
    c.done()


def test_criterion_04_resolvent_asymptotics():
    c = Checks("asymptotics")
    a = math.sqrt(0.5)
    ma = m_a(1, a)
    c("exp(-m_a) = lambda", abs(math.exp(-ma) - LAM) <= 1e-12, f"m_a={ma:.15f}")
    table = green_dirichlet(build(LatticeSpec(1, 200)), alpha=1.0)
    n = np.arange(10, 51)
    rho = np.log(_on_axis(table, 50)[10:]) + ma * n
    c("log G_1 + m_a|x| constant on [10,50]", np.ptp(rho) <= 1e-6, f"spread {np.ptp(rho):.3g}")
    t2 = green_dirichlet(build(LatticeSpec(2, 80)), alpha=1.0)
    fit = asymptotic_fit(t2, directions=("axis", "diagonal"), window=(5, 25))
    for name in ("axis", "diagonal"):
        ray = fit.ray(name)
        c(f"Z^2 drift decreasing ({name})", ray.drift_monotone,
          f"drift {np.array2string(np.asarray(ray.local_drift), precision=2)}")
    c.done()


def test_criterion_05_criticality_constants():
    c = Checks("criticality")
    line = criticality_constant(LatticeSpec(1, 400), alpha=1.0, radii=[400])
    g1 = 1 / math.sqrt(5)
    dev = abs(line.constants[-1] * g1 - 1)
    c("Z^1 |C* G(o) - 1|", dev <= 5e-3, f"C*={line.constants[-1]:.9f}, dev {dev:.3g}")
    tree = criticality_constant(TreeSpec(3, 25), alpha=1.0, radii=[25])
    groot = green_dirichlet(build(TreeSpec(3, 16)), alpha=1.0).values[0]
    cst = tree.constants[-1]
    dev = abs(cst * groot - 1)
    c("tree |C* G(o) - 1|", dev <= 5e-3, f"C*={cst:.6f}, dev {dev:.3g}")
    c("tree C* = 3", abs(cst - 3) <= 5e-3 * 3, f"C*={cst:.6f}")
    plane = criticality_constant(LatticeSpec(2, 200), alpha=0.0, radii=[50, 100, 200])
    consts = plane.constants
    c("Z^2 C*_R decreasing", all(b < a for a, b in zip(consts, consts[1:])),
      f"{np.round(consts, 4).tolist()}")
    c("Z^2 C*_200 < 1e-2", consts[-1] < 1e-2, f"C*_200={consts[-1]:.4f}")
    c.done()


def test_criterion_06_null_sequences():
    c = Checks("null sequences")
    q1 = null_sequence_energy(1, "tent", [2, 5, 10, 100, 1000])
    err = max(abs(q - 2 / n) for n, q in q1)
    c("Z^1 Q(tent_n) = 2/n", err <= 1e-12, f"max err {err:.3g}")
    q2 = null_sequence_energy(2, "log", [10, 30, 100])
    vals = [q for _, q in q2]
    c("Z^2 log energies decreasing", vals[0] > vals[1] > vals[2], f"{np.round(vals, 4).tolist()}")
    c("Z^2 below 0.5 at support 1e4", vals[-1] < 0.5, f"Q={vals[-1]:.4f}")
    q3 = [q for _, q in null_sequence_energy(3, "tent", [4, 8, 16, 32])]
    c("Z^3 tent energies bounded below", min(q3) > 0.1 and q3[-1] >= q3[0],
      f"{np.round(q3, 4).tolist()}")
    c.done()


def test_criterion_07_identity_suites():
    c = Checks("identities")
    rng = np.random.default_rng(7)
    gst, sym, mx = 0.0, 0.0, 0.0
    for _ in range(100):
        g, V = random_instance(rng)
        inner = g.interior
        f = rng.uniform(0.5, 2.0, g.n)
        phi = np.where(inner, rng.standard_normal(g.n), 0.0)
        lhs, rhs = ground_state_transform_check(g, V, f, phi)
        gst = max(gst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
        h1 = np.where(inner, rng.standard_normal(g.n), 0.0)
        h2 = np.where(inner, rng.standard_normal(g.n), 0.0)
        a, b = green_pairing(g, V, h1, h2), green_pairing(g, V, h2, h1)
        sym = max(sym, abs(a - b) / max(abs(a), abs(b), 1e-300))
        u = subharmonic_sample(g, V, rng.uniform(0, 1, g.n) * (rng.uniform(size=g.n) < 0.5))
        v = subharmonic_sample(g, V, rng.uniform(0, 1, g.n) * (rng.uniform(size=g.n) < 0.5))
        w = pointwise_max(u, v)
        Hw = apply_schrodinger(g, V, w)[inner]
        scale = max(np.max(np.abs(u)), np.max(np.abs(v)), 1e-300)
        mx = max(mx, max(float(np.max(Hw)), 0.0) / scale)
    c("ground state transform", gst <= 1e-12, f"max rel {gst:.3g}")
    c("Green formula symmetry", sym <= 1e-12, f"max rel {sym:.3g}")
    c("max of subharmonic pair", mx <= 1e-10, f"max residual {mx:.3g}")
    c.done()


@pytest.mark.parametrize("case", ["line", "cube", "tree"])
def test_criterion_08_sharpness_instance(case):
    spec, theorem = {"line": (LatticeSpec(1, 200), "4.1"), "cube": (LatticeSpec(3, 20), "4.1"),
                     "tree": (TreeSpec(3, 16), "4.3")}[case]
    c = Checks(f"sharpness {case}")
    g = build(spec)
    inst = sharpness_instance(green_dirichlet(g, alpha=1.0))
    o = g.root
    c("residual", inst.residual <= 1e-9, f"{inst.residual:.3g}")
    c("V <= 1", bool(np.all(inst.V[g.interior] <= 1)))
    c("V(o) = 1 - 1/G_1(o)", abs(inst.V[o] - (1 - 1 / inst.u[o])) <= 1e-12,
      f"V(o)={inst.V[o]:.9f}")
    rep = check_theorem(theorem, g, inst.u, inst.V)
    c("exactly the liminf violated", rep.violated == ["liminf"],
      f"violated={rep.violated}, proxy {rep.decay_liminf_proxy:.4g}, red_flag={rep.red_flag}")
    c.done()


@pytest.mark.parametrize("case", [(1, 0.25, 0.0, 400, 60, 0.10), (1, 0.25, 1.0, 400, 60, 0.10),
                                  (2, 0.5, 1.0, 80, 20, 0.15)],
                         ids=["d1-alpha0", "d1-alpha1", "d2-alpha1"])
def test_criterion_09_fractional_slopes(case):
    d, sigma, alpha, box, rw, tol = case
    c = Checks(f"fractional {case}")
    t0 = time.perf_counter()
    fit = fractional_green_slopes(d, sigma, alpha, box, rw)
    elapsed = time.perf_counter() - t0
    c("slope", fit.rel_error <= tol,
      f"{fit.slope:.4f} vs {fit.expected:.4f} (rel {fit.rel_error:.3f}, "
      f"window {fit.window})")
    fw = fractional_weights(d, sigma, rw)
    c("dual quadrature", fw.dual_agreement <= 1e-9, f"{fw.dual_agreement:.3g}")
    if d == 2:
        w = [fw.weight(z) for z in [(1, 2), (2, 1), (-1, 2), (2, -1), (-2, -1)]]
        spread = (max(w) - min(w)) / max(w)
        c("symmetry classes", spread <= 1e-12, f"{spread:.3g}")
    else:
        spread = max(abs(fw.weight((k,)) - fw.weight((-k,))) / fw.weight((k,))
                     for k in range(1, rw + 1))
        c("symmetry z -> -z", spread <= 1e-12, f"{spread:.3g}")
    c("runtime share < 200 s", elapsed < 200, f"{elapsed:.1f} s")
    c.done()


def test_criterion_10_cubic_hardy_weight():
    c = Checks("Z^3 Hardy")
    g0 = green_exhaustion(LatticeSpec(3, 10), alpha=0.0, core_radius=15, tol=1e-3, order=1.0)
    c("G_0 converged", g0.converged, f"est err {g0.est_error:.3g}")
    table = supersolution_hardy(g0.graph, g0.values)
    c("(Delta - W) v = 0", table.identity_residual <= 1e-12, f"{table.identity_residual:.3g}")
    c("W >= 0", table.min_weight >= -1e-14, f"min W {table.min_weight:.3g}")
    n = np.arange(5, 16)
    vals = _on_axis(g0, 15)[5:]
    slope = np.polyfit(np.log(n), np.log(vals), 1)[0]
    c("G_0 slope ~ -1", abs(slope + 1) <= 0.1, f"{slope:.4f}")
    c("oscillation finite", math.isfinite(table.oscillation_sup),
      f"{table.oscillation_sup:.4f}")
    c.done()
