"""Acceptance criteria 1-13, one PASS/FAIL line each.

Run directly (``python tests/test_acceptance.py``) for the bare report, or
through pytest, which prints the same lines in its terminal summary.
"""

import math
import subprocess
import sys

import numpy as np
import pytest

from arsgeo import expr_dsl as ed
from arsgeo.frame_core import classify_point, genericity_check, orientability_check, trace_singular_locus
from arsgeo.gauss_bonnet import _fit, build_tube, boundary_kg_integral, gauss_bonnet_limit, loglog_slope
from arsgeo.hamiltonian_flow import (
    exp_map,
    flow_with_variations,
    geodesic,
    hamiltonian_values,
    initial_covectors,
    integrate_states,
)
from arsgeo.loci import (
    TAN_ROOT,
    CutFinder,
    conjugate_locus,
    conjugate_time,
    grushin_geodesic_m10,
    grushin_geodesic_origin,
    m10_theta,
    parabola_coefficient,
)
from arsgeo.metric import curvature_normal_form, gauss_curvature_array
from arsgeo.scenarios import get_scenario, list_scenarios

EPS = [0.2, 0.1, 0.05, 0.025]
RESULTS = {}


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    line = f"C{n:<2d} {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    return ok


def grushin():
    return get_scenario("grushin").frame


# ---------------------------------------------------------------------------


def criterion_1():
    f = grushin()
    ts = np.linspace(0, 5, 201)
    worst = 0.0
    for a in (0.0, 0.5, -0.5, 1.0, -1.0, 2.0):
        for sign in (1, -1):
            s0 = initial_covectors(f, (0, 0), a, sign).as_array()
            out, _, _ = integrate_states(f, s0, ts)
            ref = grushin_geodesic_origin(sign, a, ts)
            worst = max(worst, float(np.max(np.abs(out[0, :, :2] - ref))))
    worst = max(worst, float(np.max(np.abs(exp_map(f, (0, 0), 1.0, 4.0) - grushin_geodesic_origin(1, 1.0, 4.0)))))
    return record(1, worst <= 1e-6, f"exp_map vs closed form from the origin: max error {worst:.2e} (tol 1e-6)")


def criterion_2():
    f = grushin()
    finder = CutFinder(f, (0, 0), 7.0, a_max=5.0)
    rel, xerr = 0.0, 0.0
    for a in (0.5, 1.0, 2.0):
        t, p = finder.cut_time(a, 1)
        rel = max(rel, abs(t - math.pi / a) / (math.pi / a))
        xerr = max(xerr, abs(p[0]))
    ok = rel <= 1e-3 and xerr <= 1e-6
    return record(2, ok, f"cut time pi/|a| rel error {rel:.2e} (tol 1e-3), |x_cut| {xerr:.2e} (tol 1e-6)")


def criterion_3():
    f = grushin()
    t = conjugate_time(f, (0, 0), 1.0, 6.0)
    terr = abs(t - 4.49340946)
    a = np.array([0.6, 0.8, 1.0, 1.5, 2.0, 3.0])
    pts = conjugate_locus(f, (0, 0), a, 9.0)
    c = parabola_coefficient(TAN_ROOT)
    x = np.array([p.q[0] for p in pts])
    y = np.array([p.q[1] for p in pts])
    c_fit = float(np.sum(y * x * x) / np.sum(x**4))
    resid = float(np.max(np.abs(y - c * x * x) / (c * x * x)))
    ok = terr <= 1e-4 and resid < 1e-3 and len(pts) == len(a) and abs(c_fit - c) < 1e-3 * c
    return record(3, ok, f"tau={t:.10f} (err {terr:.1e}), parabola c={c:.6f} fit {c_fit:.6f}, "
                         f"max rel residual {resid:.1e}")


def criterion_4():
    f = grushin()
    g1 = grushin_geodesic_m10("G1", 1.0, math.pi)
    g2 = grushin_geodesic_m10("G2", 1.0, math.pi)
    meet = max(np.max(np.abs(g1 - [1, math.pi / 2])), np.max(np.abs(g2 - [1, math.pi / 2])))
    num = exp_map(f, (-1, 0), m10_theta("G1", 1.0), math.pi)
    meet = max(meet, float(np.max(np.abs(num - [1, math.pi / 2]))))
    finder = CutFinder(f, (-1, 0), 8.0)
    xerr, ymin, missing = 0.0, math.inf, 0
    for fam in ("G1", "G2", "G3", "G4"):
        for a in (0.45, 0.6, 0.75, 0.9, 1.0):
            t, p = finder.cut_time(m10_theta(fam, a))
            if t is None:
                missing += 1
                continue
            xerr = max(xerr, abs(p[0] - 1))
            ymin = min(ymin, abs(p[1]))
    tc = conjugate_time(f, (-1, 0), m10_theta("G1", 1.0), 5.0)
    ok = meet < 1e-8 and missing == 0 and xerr <= 1e-3 and ymin >= math.pi / 2 - 1e-3 and abs(tc - math.pi) <= 1e-4
    return record(4, ok, f"G1/G2 meet error {meet:.1e}; cut points |x-1| <= {xerr:.1e}, min |y| {ymin:.6f}; "
                         f"conjugate time {tc:.8f}")


def criterion_5():
    rng = np.random.default_rng(5)
    worst = 0.0
    for name in ("grushin", "davydov", "torus_sin"):
        f = get_scenario(name).frame
        x0, x1, y0, y1 = f.chart.window
        pts = []
        while len(pts) < 500:
            x, y = rng.uniform(x0, x1), rng.uniform(y0, y1)
            if abs(f.det(x, y)) > 1e-3:
                pts.append((x, y))
        pts = np.array(pts)
        fexpr = f.normal_form_f
        K = gauss_curvature_array(f, pts[:, 0], pts[:, 1])
        ref = np.array([curvature_normal_form(fexpr, q) for q in pts])
        worst = max(worst, float(np.max(np.abs(K - ref))))
    k1 = float(gauss_curvature_array(grushin(), 1.0, 0.7))
    ok = worst <= 1e-6 and abs(k1 + 2) <= 1e-12
    return record(5, ok, f"K vs normal form on 3x500 points: max abs diff {worst:.1e} (tol 1e-6); K(1, .)={k1:.15g}")


def _converged(n, name):
    rep = gauss_bonnet_limit(get_scenario(name), EPS)
    _, _, resid = _fit(rep.eps, rep.I)
    scale = max(map(abs, rep.B_plus))
    ok = rep.verdict == "converged" and abs(rep.limit - rep.expected) <= 1e-2
    ok = ok and float(np.max(np.abs(resid))) <= 1e-9 * scale
    return record(n, ok, f"{name}: L={rep.limit:.3e} +- {rep.limit_err:.1e}, expected {rep.expected:g}, "
                         f"max fit residual {np.max(np.abs(resid)):.1e}")


def criterion_6():
    return _converged(6, "sphere_quantum")


def criterion_7():
    return _converged(7, "torus_sin_warped")


def criterion_8():
    rep = gauss_bonnet_limit(get_scenario("torus_cos"), EPS)
    slope = loglog_slope(rep.eps, rep.I)
    ok = rep.verdict == "diverged" and abs(slope + 3) <= 0.1
    return record(8, ok, f"torus_cos verdict {rep.verdict}, log-log slope {slope:.5f} (want -3 +- 0.1)")


def criterion_9():
    tube = build_tube(get_scenario("warped_strip"))
    d = [abs(boundary_kg_integral(None, tube, e, 1) - boundary_kg_integral(None, tube, e, -1)) for e in EPS]
    slope = loglog_slope(EPS, d)
    gt = build_tube(get_scenario("grushin"))
    g = max(abs(boundary_kg_integral(None, gt, e, 1) - boundary_kg_integral(None, gt, e, -1)) for e in EPS)
    ok = slope >= 0.9 and g <= 1e-8
    return record(9, ok, f"warped strip |B+ - B-| slope {slope:.4f} (>= 0.9); grushin max |B+ - B-| {g:.1e}")


def _random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.2:
        k = rng.integers(3)
        return ed.Var("x") if k == 0 else ed.Var("y") if k == 1 else ed.Const(round(float(rng.uniform(0, 3)), 3))
    k = rng.integers(7)
    a = _random_tree(rng, depth - 1)
    if k < 3:
        return ed.Unary(["neg", "sin", "cos"][k], a)
    if k == 3:
        return ed.Unary("exp", ed.Unary("sin", a))
    if k == 4:
        return ed.Binary("div", a, ed.Binary("add", ed.Const(2.0), ed.Unary("cos", a)))
    return ed.Binary(["add", "mul"][k - 5], a, _random_tree(rng, depth - 1))


def criterion_10():
    rng = np.random.default_rng(10)
    hdrift = 0.0
    cases = [("grushin", (0, 0), a, b) for a in (0.0, 0.5, 1.0, 2.0) for b in (1, -1)]
    cases += [("grushin", (-1, 0), th, 1) for th in np.linspace(-3, 3, 7)]
    cases += [("davydov", (0.5, -1.0), th, 1) for th in np.linspace(-3, 3, 7)]
    cases += [("torus_sin_warped", (1.0, 1.0), th, 1) for th in np.linspace(-3, 3, 7)]
    cases += [("sphere_quantum", (1.0, 0.5), th, 1) for th in np.linspace(-3, 3, 7)]
    for name, q, th, b in cases:
        f = get_scenario(name).frame
        g = geodesic(f, q, th, 5.0, branch=b)
        hdrift = max(hdrift, float(np.max(np.abs(hamiltonian_values(f, g.states) - 0.5))))
    sym, var = 0.0, 0.0
    for name, q, th in (("grushin", (0, 0), 1.0), ("grushin", (-1, 0), 0.4), ("davydov", (0.5, -1.0), 2.0),
                        ("warped_strip", (0.3, 0.2), -0.8)):
        f = get_scenario(name).frame
        T = 10.0 if name == "grushin" else 3.0
        g, vf = flow_with_variations(f, q, th, T)
        sym = max(sym, vf.symplectic_defect())
        s0 = g.at(0.0)
        M = vf.at(T)
        h = 1e-6
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            out, _, _ = integrate_states(f, np.stack([s0 + e, s0 - e]), [T], tol=1e-12)
            col = (out[0, 0] - out[1, 0]) / (2 * h)
            var = max(var, float(np.linalg.norm(col - M[:, k]) / max(1.0, np.linalg.norm(M[:, k]))))
    dsl = 0.0
    for _ in range(100):
        e = _random_tree(rng, 6)
        pts = rng.uniform(-1.5, 1.5, size=(100, 2))
        x, y = pts[:, 0], pts[:, 1]
        hh = 1e-5
        for v, (dx, dy) in (("x", (hh, 0)), ("y", (0, hh))):
            d = np.atleast_1d(ed.evaluate(ed.diff(e, v), x, y))
            fd = (ed.evaluate(e, x + dx, y + dy) - ed.evaluate(e, x - dx, y - dy)) / (2 * hh)
            dsl = max(dsl, float(np.max(np.abs(d - fd) / (1 + np.abs(d)))))
    ok = hdrift <= 1e-8 and sym <= 1e-6 and var <= 1e-4 and dsl <= 1e-6
    return record(10, ok, f"H drift {hdrift:.1e}; symplectic defect {sym:.1e}; variational vs FD {var:.1e}; "
                          f"DSL derivative {dsl:.1e}")


def criterion_11():
    f = grushin()
    kinds = {classify_point(f, q).kind for c in trace_singular_locus(f, 96) for q in c.points}
    d = genericity_check(get_scenario("davydov").frame)
    tc = genericity_check(get_scenario("torus_cos").frame)
    ok = kinds == {"Grushin"} and len(d.tangency_points) == 1
    ok = ok and np.allclose(d.tangency_points[0], (0, 0), atol=1e-8) and not tc.isolated_tangencies
    return record(11, ok, f"grushin Z kinds {sorted(kinds)}; davydov tangencies {d.tangency_points}; "
                          f"torus_cos conditions {tc.as_tuple()}")


def criterion_12():
    got = {n: orientability_check(get_scenario(n).ars) for n in list_scenarios()}
    ok = got.pop("torus_distribution_atlas") == "non-orientable" and all(v == "orientable" for v in got.values())
    return record(12, ok, f"atlas non-orientable; {len(got)} single-chart scenarios incl. klein_frame orientable")


CLI_COMMANDS = [
    ["scenario", "list"],
    ["classify", "--scenario", "davydov", "--point", "0,0"],
    ["singular-locus", "--scenario", "torus_sin", "--grid", "64"],
    ["geodesic", "--scenario", "grushin", "--from", "0,0", "--theta", "1", "--tmax", "5"],
    ["front", "--scenario", "grushin", "--from", "0,0", "--t", "1", "--n", "720"],
    ["conjugate", "--scenario", "grushin", "--from", "0,0", "--theta", "1"],
    ["cut", "--scenario", "grushin", "--from", "0,0", "--theta", "0.5,1,2"],
    ["cut", "--scenario", "grushin_m10", "--theta=-1.5707963267948966,-0.6435011087932844"],
    ["curvature-grid", "--scenario", "davydov", "--grid", "32"],
    ["gauss-bonnet", "--scenario", "sphere_quantum", "--eps", "0.2,0.1,0.05,0.025"],
    ["gauss-bonnet", "--scenario", "torus_cos"],
    ["orientability", "--scenario", "torus_distribution_atlas"],
]


def criterion_13():
    bad = []
    for argv in CLI_COMMANDS:
        runs = [subprocess.run([sys.executable, "-m", "arsgeo", *argv], capture_output=True) for _ in range(2)]
        if runs[0].returncode != 0 or runs[0].stdout != runs[1].stdout or not runs[0].stdout:
            bad.append(argv[0])
    return record(13, not bad, f"{len(CLI_COMMANDS)} CLI commands run twice, byte-identical"
                  + (f"; differing: {bad}" if bad else ""))


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11, criterion_12, criterion_13]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 14)])
def test_acceptance(check):
    assert check()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
