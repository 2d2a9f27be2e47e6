import math

import numpy as np
import pytest

from arsgeo.errors import InputError
from arsgeo.hamiltonian_flow import geodesic
from arsgeo.loci import (
    TAN_ROOT,
    CutFinder,
    conjugate_locus,
    conjugate_time,
    cut_time,
    g4_variant_check,
    grushin_geodesic_m10,
    grushin_geodesic_origin,
    m10_theta,
    parabola_coefficient,
)


@pytest.fixture(scope="module")
def origin_finder(grushin):
    return CutFinder(grushin, (0, 0), 7.0, a_max=5.0)


@pytest.fixture(scope="module")
def m10_finder(grushin):
    return CutFinder(grushin, (-1, 0), 6.0)


@pytest.fixture(scope="module")
def grushin(request):
    from arsgeo.scenarios import get_scenario

    return get_scenario("grushin").frame


def test_tan_root():
    assert math.tan(TAN_ROOT) == pytest.approx(TAN_ROOT, rel=1e-10)
    assert abs(TAN_ROOT - 4.49340946) < 1e-8


def test_closed_form_examples():
    assert np.allclose(grushin_geodesic_origin(1, 0, 2.5), [2.5, 0])
    assert np.allclose(grushin_geodesic_origin(1, 1, math.pi), [0, math.pi / 2], atol=1e-15)
    assert np.allclose(grushin_geodesic_origin(1, 1, math.pi / 2), [1, math.pi / 4])
    assert np.allclose(grushin_geodesic_m10("G1", 1, 0), [-1, 0])
    assert np.allclose(grushin_geodesic_m10("G1", 1, math.pi), [1, math.pi / 2])
    assert np.allclose(grushin_geodesic_m10("G2", 1, math.pi), [1, math.pi / 2])
    with pytest.raises(InputError):
        grushin_geodesic_m10("G1", 1.5, 1.0)
    with pytest.raises(InputError):
        grushin_geodesic_origin(0, 1.0, 1.0)


def test_conjugate_examples(grushin):
    assert abs(conjugate_time(grushin, (0, 0), 1.0, 6.0) - 4.49340946) <= 1e-4
    assert conjugate_time(grushin, (0, 0), 0.0, 20.0) is None
    assert abs(conjugate_time(grushin, (-1, 0), m10_theta("G1", 1.0), 5.0) - math.pi) <= 1e-4


def test_conjugate_scaling(grushin):
    for a in (0.5, 2.0, -1.5):
        for b in (1, -1):
            t = conjugate_time(grushin, (0, 0), a, 12.0, branch=b)
            assert t == pytest.approx(TAN_ROOT / abs(a), rel=1e-8)


def test_conjugate_tolerance_stable(grushin):
    for q, th in (((0, 0), 1.0), ((-1, 0), m10_theta("G1", 1.0)), ((-1, 0), m10_theta("G2", 0.8))):
        t1 = conjugate_time(grushin, q, th, 8.0, tol=1e-10)
        t2 = conjugate_time(grushin, q, th, 8.0, tol=5e-11)
        assert abs(t1 - t2) < 1e-6


def test_conjugate_locus_parabola(grushin):
    a = np.array([0.7, 1.0, 1.5, 2.0, 3.0])
    pts = conjugate_locus(grushin, (0, 0), np.concatenate([a, -a]), 8.0, np.ones(10, int))
    assert len(pts) == 10
    c = parabola_coefficient()
    for p in pts:
        x, y = p.q
        # a < 0 gives the mirror image y = -c x^2
        assert abs(abs(y) - c * x * x) <= 1e-3 * c * x * x
        assert np.sign(y) == np.sign(p.theta)


def test_flat_has_no_conjugate_points(euclid):
    assert conjugate_locus(euclid, (0, 0), np.linspace(-3, 3, 7), 10.0) == []


def test_conjugate_after_crossing(grushin):
    for th in np.linspace(-1.2, 1.2, 7):
        t = conjugate_time(grushin, (-1, 0), th, 8.0)
        if t is None:
            continue
        g = geodesic(grushin, (-1, 0), th, t)
        x = g.states[:, 0]
        assert np.any(x > 0), "conjugate point before reaching Z"


def test_cut_from_origin(origin_finder):
    for a in (0.5, 1.0, 2.0):
        t, p = origin_finder.cut_time(a, 1)
        assert abs(t - math.pi / a) <= 1e-3 * math.pi / a
        assert abs(p[0]) <= 1e-6
    t, p = origin_finder.cut_time(1.0, 1)
    assert np.allclose(p, [0, math.pi / 2], atol=1e-6)


def test_cut_before_conjugate(grushin, origin_finder):
    for a in (0.8, 1.3, 2.5, -1.7):
        t, _ = origin_finder.cut_time(a, 1)
        tc = conjugate_time(grushin, (0, 0), a, 7.0)
        assert t <= tc + 1e-9


def test_cut_from_m10(m10_finder):
    t, p = m10_finder.cut_time(m10_theta("G1", 1.0))
    assert abs(t - math.pi) <= 1e-3
    assert np.allclose(p, [1, math.pi / 2], atol=1e-3)
    for fam in ("G1", "G2", "G3", "G4"):
        for a in (0.6, 0.8):
            t, p = m10_finder.cut_time(m10_theta(fam, a))
            assert abs(t - math.pi / a) <= 1e-3
            assert abs(p[0] - 1) <= 1e-6 and abs(p[1]) >= math.pi / 2 - 1e-3


def test_cut_time_function(grushin):
    assert abs(cut_time(grushin, (0, 0), 2.0, 3.0, a_max=5.0) - math.pi / 2) <= 1e-3


def test_g4_symmetric_variant(grushin):
    r = g4_variant_check(grushin, 0.6)
    assert r["match"] == "symmetric" and r["symmetric"] < 1e-8
    for fam in ("G1", "G2", "G3"):
        ts = np.linspace(0, 4, 9)
        g = geodesic(grushin, (-1, 0), m10_theta(fam, 0.6), 4.0)
        assert np.max(np.abs(g.point(ts) - grushin_geodesic_m10(fam, 0.6, ts))) < 1e-8
