import math

import numpy as np
import pytest
from scipy.integrate import quad

from arsgeo.errors import InputError, SingularPointError
from arsgeo.frame_core import Chart, Frame2
from arsgeo.metric import (
    ArclengthCurve,
    curvature_grid,
    curvature_normal_form,
    curve_kg,
    gauss_curvature,
    gauss_curvature_array,
    geodesic_curvature,
    metric_at,
    region_sign,
    signed_area_form,
)
from arsgeo.scenarios import get_scenario

R2 = (-math.inf, math.inf, -math.inf, math.inf)


def test_metric_examples(grushin, euclid):
    m = metric_at(grushin, (2, 0))
    assert np.allclose(m.g, np.diag([1.0, 0.25]))
    assert m.dA_coeff == 0.5 and m.dAs_coeff == 0.5
    m = metric_at(grushin, (-2, 0))
    assert m.dA_coeff == 0.5 and m.dAs_coeff == -0.5
    m = metric_at(euclid, (0.3, -0.7))
    assert np.array_equal(m.g, np.eye(2)) and m.dA_coeff == m.dAs_coeff == 1.0


def test_metric_refuses_z(grushin):
    with pytest.raises(SingularPointError):
        metric_at(grushin, (0.0, 1.0))


@pytest.mark.parametrize("name", ["grushin", "davydov", "torus_sin_warped", "sphere_quantum", "warped_strip"])
def test_metric_positive_and_signs(name, rng):
    f = get_scenario(name).frame
    x0, x1, y0, y1 = f.chart.window
    for q in np.column_stack([rng.uniform(x0, x1, 40), rng.uniform(y0, y1, 40)]):
        if abs(f.det(*q)) < 1e-6:
            continue
        m = metric_at(f, q)
        assert np.allclose(m.g, m.g.T, rtol=0, atol=1e-12 * np.abs(m.g).max())
        assert np.all(np.linalg.eigvalsh(m.g) > 0)
        assert region_sign(f, q) * m.dA_coeff == pytest.approx(m.dAs_coeff, rel=1e-15)
        v, w = rng.normal(size=2), rng.normal(size=2)
        assert signed_area_form(f, q, v, w) == -signed_area_form(f, q, w, v)
        F = f.matrix(*q)
        assert signed_area_form(f, q, F[:, 0], F[:, 1]) == pytest.approx(1.0, abs=1e-12)


def test_curvature_examples(grushin, davydov, euclid):
    assert gauss_curvature(grushin, (1, 3)) == pytest.approx(-2.0, abs=1e-12)
    assert gauss_curvature(davydov, (1, 0)) == pytest.approx(-6.0, abs=1e-12)
    assert gauss_curvature(euclid, (0.4, 1.1)) == 0.0
    assert curvature_normal_form("x", (1, 7)) == -2.0
    assert curvature_normal_form("y - x^2", (1, 0)) == -6.0
    assert curvature_normal_form("1 - cos(x)", (math.pi, 0)) == pytest.approx(-0.5, abs=1e-15)


def test_davydov_closed_form(davydov, rng):
    for x, y in rng.uniform(-2, 2, size=(50, 2)):
        if abs(y - x * x) < 1e-2:
            continue
        expected = -2 * (3 * x * x + y) / (x * x - y) ** 2
        assert gauss_curvature(davydov, (x, y)) == pytest.approx(expected, rel=1e-10)


def test_fd_route_agrees(rng):
    f = get_scenario("torus_sin_warped").frame
    pts = rng.uniform(-3, 3, size=(50, 2))
    pts = pts[np.abs(f.det(pts[:, 0], pts[:, 1])) > 0.05]
    a = gauss_curvature_array(f, pts[:, 0], pts[:, 1])
    b = gauss_curvature_array(f, pts[:, 0], pts[:, 1], method="fd")
    assert np.allclose(a, b, rtol=1e-6)
    with pytest.raises(InputError):
        gauss_curvature_array(f, 1.0, 1.0, method="spline")


def test_sphere_curvature_is_not_constant():
    f = get_scenario("sphere_quantum").frame
    Ks = [gauss_curvature(f, (u, v)) for u, v in [(0.5, 0.3), (1.0, 1.0), (2.0, -2.5)]]
    assert np.ptp(Ks) > 1e-3


def test_curvature_grid_columns(grushin):
    rows = curvature_grid(grushin, 8)
    assert rows.shape == (64, 6)
    good = np.isfinite(rows[:, 2])
    assert np.allclose(rows[good, 2], -2 / rows[good, 0] ** 2)
    assert np.allclose(rows[good, 5] * rows[good, 3], rows[good, 4])


def test_kg_vertical_lines(grushin):
    for eps in (0.5, 0.1, 0.01):
        for y in (-1.0, 0.0, 2.0):
            assert curve_kg(grushin, (eps, y), (0, -eps), (0, 0), 1) == pytest.approx(1 / eps, rel=1e-12)


def test_kg_warped_vertical_line():
    f = Frame2(("1", "0"), ("0", "x*exp(x*y)"), Chart("w", R2, window=(-1.0, 1.0, -1.0, 1.0)))
    eps = 0.05
    y0 = 0.4
    # unit-speed downward line through (eps, y0), from its exact arclength parameterisation
    s = np.linspace(-0.02, 0.02, 41)
    ys = -np.log(np.exp(-eps * y0) + eps * eps * s) / eps
    curve = ArclengthCurve.from_samples(s, np.column_stack([np.full_like(s, eps), ys]))
    assert geodesic_curvature(f, curve, 0.0) == pytest.approx(1 / eps + y0, abs=1e-6)


def test_kg_rejects_non_unit_speed(euclid):
    s = np.linspace(0, 1, 11)
    curve = ArclengthCurve.from_samples(s, np.column_stack([2 * s, 0 * s]))
    with pytest.raises(InputError):
        geodesic_curvature(euclid, curve, 0.5)


def test_circle_kg(euclid):
    R = 1.5
    s = np.linspace(0, 2 * math.pi * R, 200)
    pts = R * np.column_stack([np.cos(s / R), np.sin(s / R)])
    curve = ArclengthCurve.from_samples(s, pts)
    assert geodesic_curvature(euclid, curve, 3.0) == pytest.approx(1 / R, abs=1e-6)


def test_riemannian_disk_gauss_bonnet():
    # round-sphere chart metric, disk around the north pole, curvature and boundary terms
    f = Frame2(("1", "0"), ("0", "1/sin(x)"), Chart("cap", (0.0, math.pi, -math.pi, math.pi), (False, True),
                                                    window=(0.01, 3.13, -math.pi, math.pi)))
    r = 0.8

    def inner(u):
        return gauss_curvature(f, (u, 0.3)) * math.sin(u)

    interior = 2 * math.pi * quad(inner, 1e-9, r, epsabs=1e-12)[0]
    # boundary u = r with the disk u < r on its left
    c1 = (0.0, 1 / math.sin(r))
    kg = curve_kg(f, (r, 0.3), c1, (0.0, 0.0), 1)
    boundary = kg * 2 * math.pi * math.sin(r)
    assert interior + boundary == pytest.approx(2 * math.pi, abs=1e-6)


def test_euclidean_disk_gauss_bonnet(euclid):
    R = 0.9
    t = np.linspace(0, 2 * math.pi, 401)
    kg = curve_kg(euclid, np.column_stack([R * np.cos(t), R * np.sin(t)]),
                  np.column_stack([-R * np.sin(t), R * np.cos(t)]),
                  np.column_stack([-R * np.cos(t), -R * np.sin(t)]))
    total = np.trapezoid(kg * R, t)
    assert total == pytest.approx(2 * math.pi, abs=1e-6)
