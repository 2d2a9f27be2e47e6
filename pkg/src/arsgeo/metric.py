"""Riemannian data induced by a frame away from the singular locus."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline

from . import expr_dsl as ed
from .errors import InputError, SingularPointError
from .frame_core import Z_TOL, Frame2, _as_point

__all__ = [
    "MetricData",
    "ArclengthCurve",
    "metric_at",
    "gauss_curvature",
    "gauss_curvature_array",
    "curvature_normal_form",
    "signed_area_form",
    "region_sign",
    "christoffel",
    "geodesic_curvature",
    "curve_kg",
    "curvature_grid",
]

log = logging.getLogger(__name__)

FD_STEP = 1e-5


@dataclass(frozen=True)
class MetricData:
    g: np.ndarray
    K: float
    dA_coeff: float
    dAs_coeff: float


def _frame_arrays(f: Frame2, x, y):
    F = f.matrix(x, y)
    det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    if np.any(np.abs(det) <= Z_TOL):
        bad = np.argwhere(np.atleast_1d(np.abs(det) <= Z_TOL))[0]
        xb = np.atleast_1d(x)[bad[0]] if np.ndim(x) else x
        yb = np.atleast_1d(y)[bad[0]] if np.ndim(y) else y
        raise SingularPointError(f"point ({float(xb)!r}, {float(yb)!r}) lies on the singular locus")
    return F, det


def _inv_metric(F):
    return F @ np.swapaxes(F, -1, -2)


def metric_at(f: Frame2, q) -> MetricData:
    q = f.chart.check(q)
    F, det = _frame_arrays(f, q[0], q[1])
    g = np.linalg.inv(_inv_metric(F))
    return MetricData(g=g, K=gauss_curvature(f, q), dA_coeff=float(1.0 / abs(det)), dAs_coeff=float(1.0 / det))


def _alpha_beta(f: Frame2, x, y):
    F, _ = _frame_arrays(f, x, y)
    B = f.bracket_field.value(x, y)
    ab = np.linalg.solve(F, B[..., None])[..., 0]
    return ab[..., 0], ab[..., 1]


def _lie_exact(f: Frame2, x, y):
    """alpha, beta and X(beta), Y(alpha) from symbolic first and second derivatives."""
    F, _ = _frame_arrays(f, x, y)
    B = f.bracket_field.value(x, y)
    JB = f.bracket_field.jacobian(x, y)
    JX = f.X.jacobian(x, y)
    JY = f.Y.jacobian(x, y)
    ab = np.linalg.solve(F, B[..., None])[..., 0]
    grads = []
    for k in range(2):
        dF = np.stack([JX[..., :, k], JY[..., :, k]], axis=-1)
        rhs = JB[..., :, k] - np.einsum("...ij,...j->...i", dF, ab)
        grads.append(np.linalg.solve(F, rhs[..., None])[..., 0])
    G = np.stack(grads, axis=-1)  # [..., (alpha, beta), k]
    Xv = F[..., :, 0]
    Yv = F[..., :, 1]
    Xbeta = np.sum(G[..., 1, :] * Xv, axis=-1)
    Yalpha = np.sum(G[..., 0, :] * Yv, axis=-1)
    return ab[..., 0], ab[..., 1], Xbeta, Yalpha


def gauss_curvature_array(f: Frame2, x, y, h: float = FD_STEP, method: str = "exact"):
    """K = -alpha^2 - beta^2 + X(beta) - Y(alpha) at many points.

    ``[X, Y] = alpha X + beta Y``. With ``method="exact"`` the Lie
    derivatives come from symbolic derivatives of the frame; ``"fd"`` uses a
    five-point central stencil of step h along the straight lines through q
    in the directions X(q), Y(q).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if method == "exact":
        al, be, xb, ya = _lie_exact(f, x, y)
        return -al * al - be * be + xb - ya
    if method != "fd":
        raise InputError(f"unknown curvature method {method!r}")
    al, be = _alpha_beta(f, x, y)
    Xv = f.X.value(x, y)
    Yv = f.Y.value(x, y)

    def lie(V, which):
        acc = 0.0
        for k, w in ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)):
            a, b = _alpha_beta(f, x + k * h * V[..., 0], y + k * h * V[..., 1])
            acc = acc + w * (b if which == "beta" else a)
        return acc / (12.0 * h)

    return -al * al - be * be + lie(Xv, "beta") - lie(Yv, "alpha")


def gauss_curvature(f: Frame2, q, method: str = "exact") -> float:
    q = f.chart.check(q)
    return float(gauss_curvature_array(f, q[0], q[1], method=method))


def curvature_normal_form(fexpr, q) -> float:
    """``(-2 f_x^2 + f f_xx) / f^2`` for the frame X=(1,0), Y=(0,f)."""
    fexpr = ed.as_expr(fexpr)
    q = _as_point(q)
    fv = ed.evaluate(fexpr, q[0], q[1])
    if abs(fv) <= Z_TOL:
        raise SingularPointError(f"f vanishes at {tuple(q)}")
    fx = ed.diff(fexpr, "x")
    fxx = ed.diff(fx, "x")
    a = ed.evaluate(fx, q[0], q[1])
    b = ed.evaluate(fxx, q[0], q[1])
    return float((-2.0 * a * a + fv * b) / (fv * fv))


def signed_area_form(f: Frame2, q, v, w) -> float:
    """dA_s(v, w): determinant of the frame coordinates of v and w."""
    q = f.chart.check(q)
    F, _ = _frame_arrays(f, q[0], q[1])
    cv = np.linalg.solve(F, np.asarray(v, dtype=float))
    cw = np.linalg.solve(F, np.asarray(w, dtype=float))
    return float(cv[0] * cw[1] - cv[1] * cw[0])


def region_sign(f: Frame2, q) -> int:
    q = f.chart.check(q)
    _, det = _frame_arrays(f, q[0], q[1])
    return 1 if det > 0 else -1


def christoffel(f: Frame2, x, y):
    """Christoffel symbols ``G[..., i, j, k]`` of g = (F F^T)^-1, from exact derivatives."""
    F, _ = _frame_arrays(f, x, y)
    JX = f.X.jacobian(x, y)  # [..., comp, k]
    JY = f.Y.jacobian(x, y)
    Ginv = _inv_metric(F)
    g = np.linalg.inv(Ginv)
    dg = []
    for k in range(2):
        dF = np.stack([JX[..., :, k], JY[..., :, k]], axis=-1)
        dG = dF @ np.swapaxes(F, -1, -2) + F @ np.swapaxes(dF, -1, -2)
        dg.append(-g @ dG @ g)
    dg = np.stack(dg, axis=-3)  # [..., k, i, j] = d_k g_ij
    # first kind: T[l, j, k] = d_j g_lk + d_k g_lj - d_l g_jk
    T = (
        np.einsum("...jlk->...ljk", dg)
        + np.einsum("...klj->...ljk", dg)
        - dg
    )
    return 0.5 * np.einsum("...il,...ljk->...ijk", Ginv, T)


def curve_kg(f: Frame2, q, c1, c2, orientation=1):
    """Signed geodesic curvature of a curve with any regular parameter.

    ``c1``, ``c2`` are the chart velocity and acceleration; the normal is
    ``c1`` rotated by +pi/2 in the chart orientation times ``orientation``.
    """
    q = np.asarray(q, dtype=float)
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    x, y = q[..., 0], q[..., 1]
    F, det = _frame_arrays(f, x, y)
    Gam = christoffel(f, x, y)
    acc = c2 + np.einsum("...ijk,...j,...k->...i", Gam, c1, c1)
    ab = np.linalg.solve(F, c1[..., None])[..., 0]
    rot = np.stack([-ab[..., 1], ab[..., 0]], axis=-1) * (np.sign(det) * orientation)[..., None]
    # <acc, F rot>_g = <F^-1 acc, rot>_euclid since g = F^-T F^-1
    facc = np.linalg.solve(F, acc[..., None])[..., 0]
    speed = np.hypot(ab[..., 0], ab[..., 1])
    return np.sum(facc * rot, axis=-1) / speed**3


@dataclass
class ArclengthCurve:
    """A curve parameterised by g-arclength, given through its first two jets."""

    position: Callable
    velocity: Callable
    acceleration: Callable

    @classmethod
    def from_samples(cls, s, points):
        """Quintic interpolation of samples ``points[i] = c(s[i])``."""
        spl = make_interp_spline(np.asarray(s, float), np.asarray(points, float), k=5)
        d1 = spl.derivative(1)
        d2 = spl.derivative(2)
        return cls(spl, d1, d2)


def geodesic_curvature(f: Frame2, curve: ArclengthCurve, s: float, orientation: int = 1, tol: float = 1e-8) -> float:
    """k_g of a unit-speed curve at parameter ``s``.

    ``orientation`` = +1 rotates the velocity by +pi/2 in the chart
    orientation dx^dy, -1 in the opposite one.
    """
    q = np.asarray(curve.position(s), dtype=float)
    c1 = np.asarray(curve.velocity(s), dtype=float)
    c2 = np.asarray(curve.acceleration(s), dtype=float)
    F, _ = _frame_arrays(f, q[0], q[1])
    speed = float(np.hypot(*np.linalg.solve(F, c1)))
    if abs(speed - 1.0) > tol:
        raise InputError(f"curve is not unit speed at s={s!r} (|c'|_g = {speed!r})")
    return float(curve_kg(f, q, c1, c2, orientation))


def curvature_grid(f: Frame2, n: int):
    """Rows (x, y, K, dA, dAs, region_sign) on an n-by-n grid of the chart window."""
    x0, x1, y0, y1 = f.chart.window
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    x, y = XX.ravel(), YY.ravel()
    det = np.asarray(f.det(x, y), dtype=float)
    keep = np.abs(det) > Z_TOL
    skipped = int(np.sum(~keep))
    if skipped:
        log.info("curvature grid: skipped %d point(s) on the singular locus", skipped)
    x, y, det = x[keep], y[keep], det[keep]
    K = gauss_curvature_array(f, x, y) if len(x) else np.empty(0)
    ok = np.isfinite(K)
    if not np.all(ok):
        log.info("curvature grid: skipped %d point(s) with non-finite curvature", int(np.sum(~ok)))
    x, y, det, K = x[ok], y[ok], det[ok], K[ok]
    return np.stack([x, y, K, 1.0 / np.abs(det), 1.0 / det, np.sign(det)], axis=-1)
