"""First conjugate times, cut times from front self-intersections, Grushin closed forms."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError
from .frame_core import Frame2
from .hamiltonian_flow import (
    A_MAX,
    DEFAULT_TOL,
    _on_z,
    covector_derivative,
    flow_with_variations,
    front_parameters,
    initial_covectors,
    initial_states,
    integrate_states,
    velocity,
)

__all__ = [
    "LocusPoint",
    "conjugate_time",
    "conjugate_locus",
    "cut_time",
    "cut_locus",
    "CutFinder",
    "default_theta_grid",
    "grushin_geodesic_origin",
    "grushin_geodesic_m10",
    "m10_theta",
    "g4_variant_check",
    "TAN_ROOT",
    "parabola_coefficient",
]

log = logging.getLogger(__name__)


def _tan_root():
    # first positive root of tan(t) = t lies in (pi, 3pi/2)
    a, b = math.pi + 1e-9, 1.5 * math.pi - 1e-9
    for _ in range(200):
        m = 0.5 * (a + b)
        if math.tan(m) - m < 0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


TAN_ROOT = _tan_root()


def parabola_coefficient(tau: float = TAN_ROOT) -> float:
    return 0.5 * (1.0 / (math.cos(tau) * math.sin(tau)) - 1.0 / tau)


@dataclass(frozen=True)
class LocusPoint:
    kind: str
    theta: float
    t: float
    q: tuple
    branch: int = 0


# --------------------------------------------------------------------------
# conjugate points


def _jacobi(f, states, dlam):
    M = states[:, 4:].reshape(-1, 4, 4)
    dE = M[:, :2, 2:] @ dlam
    v = velocity(f, states[:, :4])
    return dE[:, 0] * v[:, 1] - dE[:, 1] * v[:, 0]


def conjugate_time(f: Frame2, q, theta: float, tmax: float, tol: float = DEFAULT_TOL, branch: int = 1) -> Optional[float]:
    """First zero in (0, tmax] of J(t) = det[dE/dtheta, dE/dt].

    Sign changes are located on the adaptive mesh and refined by bisection
    on the dense output.
    """
    geo, _ = flow_with_variations(f, q, theta, tmax, tol, branch)
    dlam = covector_derivative(f, q, theta, branch)
    J = _jacobi(f, geo._full, dlam)
    ts = geo.times
    tiny = 1e-12
    prev = None
    for i in range(1, len(ts)):
        if J[i] == 0.0:
            return float(ts[i])
        if prev is not None and np.sign(J[i]) != np.sign(J[prev]):
            a, b = ts[prev], ts[i]
            ja = J[prev]
            while b - a > 1e-12 * max(1.0, b):
                m = 0.5 * (a + b)
                jm = _jacobi(f, geo._dense(m), dlam)[0]
                if jm == 0.0:
                    return float(m)
                if np.sign(jm) == np.sign(ja):
                    a, ja = m, jm
                else:
                    b = m
            return float(0.5 * (a + b))
        prev = i
    small = np.abs(J[1:]) < tiny
    if np.any(small[len(small) // 10:]):
        log.warning("Jacobi determinant nearly vanishes without a sign change (theta=%r)", theta)
    return None


def default_theta_grid(f: Frame2, q, a_max: float = A_MAX):
    """720 angles on the ellipse, or 600 values of a on each covector line."""
    n = 1200 if _on_z(f, np.asarray(q, float)) else 720
    theta, branch, _ = front_parameters(f, q, n, a_max)
    return theta, branch


def conjugate_locus(f: Frame2, q, theta_grid, tmax: float, branches=None, tol: float = DEFAULT_TOL):
    theta_grid = np.asarray(theta_grid, dtype=float)
    if branches is None:
        branches = np.ones(len(theta_grid), int)
    pts = []
    for th, br in zip(theta_grid, branches):
        t = conjugate_time(f, q, th, tmax, tol, int(br) or 1)
        if t is None:
            continue
        s0 = initial_covectors(f, q, th, int(br) or 1)
        out, _, _ = integrate_states(f, s0.as_array(), [t], tol=tol)
        pts.append(LocusPoint("conjugate", float(th), t, tuple(map(float, out[0, 0, :2])), int(br)))
    return pts


# --------------------------------------------------------------------------
# cut points


def _winding(D00, D10, D11, D01):
    """Winding number of the closed polygon D00 -> D10 -> D11 -> D01 about 0."""

    def ang(a, b):
        return np.arctan2(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0], np.sum(a * b, axis=-1))

    w = ang(D00, D10) + ang(D10, D11) + ang(D11, D01) + ang(D01, D00)
    return w / (2 * math.pi)


class CutFinder:
    """Front-based cut detection from one base point.

    Geodesics for every front parameter are integrated once on a coarse
    time grid. For a given ``theta`` the point ``E(theta, t)`` meets the
    front segment ``[theta'_k, theta'_k+1]`` of another arc somewhere in
    ``[t_j-1, t_j]`` exactly when the difference ``E(., .) - E(theta, .)``
    winds around 0 along the boundary of that parameter cell. The first
    such cell is refined by bisection in t and polished by Newton's
    method on ``E(theta', t) = E(theta, t)``.
    """

    def __init__(self, f: Frame2, q, tmax: float, n: Optional[int] = None, a_max: float = A_MAX,
                 dt: float = 0.04, tol: float = DEFAULT_TOL, tol_front: float = 1e-8):
        self.f = f
        self.q = np.asarray(q, dtype=float)
        self.tmax = float(tmax)
        self.tol = tol
        self.tol_front = tol_front
        self.on_z = _on_z(f, self.q)
        if n is None:
            n = 1200 if self.on_z else 720
        self.theta, self.branch, self.closed = front_parameters(f, q, n, a_max)
        nt = max(8, int(math.ceil(self.tmax / dt)))
        self.t_grid = np.linspace(0.0, self.tmax, nt + 1)[1:]
        s0 = initial_states(f, q, self.theta, self.branch)
        out, _, _ = integrate_states(f, s0, self.t_grid, tol=tol_front, strict=False)
        self.P = out[..., :2]  # (n, nt, 2), NaN after a chart exit
        if self.closed:
            self.spacing = 2 * math.pi / n
            i0 = np.arange(n)
            i1 = (i0 + 1) % n
        else:
            m = len(self.theta) // 2
            self.spacing = 2 * a_max / (m - 1)
            i0 = np.concatenate([np.arange(m - 1), m + np.arange(m - 1)])
            i1 = i0 + 1
        self.i0, self.i1 = i0, i1

    def _pdist(self, a, b):
        d = np.abs(a - b)
        if self.closed:
            d = np.mod(d, 2 * math.pi)
            d = np.minimum(d, 2 * math.pi - d)
        return d

    def _endpoints(self, thetas, branch, t, tol):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        s0 = initial_states(self.f, self.q, thetas, np.full(len(thetas), branch))
        out, _, _ = integrate_states(self.f, s0, [t], tol=tol, strict=False)
        return out[:, 0, :2]

    def _excluded(self, th0, th1, b0, b1, theta, br):
        w = 2.5 * self.spacing
        return (b0 == br) & (b1 == br) & ((self._pdist(th0, theta) < w) | (self._pdist(th1, theta) < w))

    def cut_time(self, theta: float, branch: int = 0, cap_conjugate: bool = True):
        """Return ``(t_cut, point)`` or ``(None, None)`` if no cut before tmax."""
        br = branch if self.on_z else 0
        brc = br if br else 1
        s0 = initial_covectors(self.f, self.q, theta, brc).as_array()
        out, _, _ = integrate_states(self.f, s0, self.t_grid, tol=self.tol_front, strict=False)
        E = out[0, :, :2]  # (nt, 2)

        keep = ~self._excluded(self.theta[self.i0], self.theta[self.i1],
                               self.branch[self.i0], self.branch[self.i1], theta, br)
        seg = np.nonzero(keep)[0]
        D0 = self.P[self.i0[seg]] - E[None]  # (nseg, nt, 2)
        D1 = self.P[self.i1[seg]] - E[None]
        W = _winding(D0[:, :-1], D1[:, :-1], D1[:, 1:], D0[:, 1:])  # (nseg, nt-1)
        W = np.where(np.isfinite(W), W, 0.0)
        flagged = np.abs(W) > 0.4
        t_cut = None
        if np.any(flagged):
            cols = np.nonzero(flagged.any(axis=0))[0]
            j = int(cols[0])
            k = int(seg[np.argmax(flagged[:, j])])
            t_cut = self._refine(theta, brc, br, k, j)
        if cap_conjugate:
            tc = conjugate_time(self.f, self.q, theta, self.tmax, self.tol, brc)
            if tc is not None and (t_cut is None or tc < t_cut):
                t_cut = tc
        if t_cut is None:
            return None, None
        pt = self._endpoints([theta], brc, t_cut, self.tol)[0]
        return float(t_cut), pt

    def _refine(self, theta, brc, br, k, j):
        k0, k1 = self.i0[k], self.i1[k]
        ta_p, tb_p = self.theta[k0], self.theta[k1]
        if self.closed and tb_p < ta_p:
            tb_p += 2 * math.pi
        pbr = int(self.branch[k0])
        pbrc = pbr if pbr else 1
        win = np.linspace(ta_p - 2 * self.spacing, tb_p + 2 * self.spacing, 25)
        if pbr == br:
            win = win[self._pdist(win, theta) >= 2.5 * self.spacing]
        # t_grid[j] and t_grid[j+1] bracket the crossing
        ta, tb = float(self.t_grid[j]), float(self.t_grid[j + 1])

        def diffs(t):
            e = self._endpoints([theta], brc, t, self.tol)[0]
            return self._endpoints(win, pbrc, t, self.tol) - e

        Da = diffs(ta)
        partner = 0.5 * (ta_p + tb_p)
        for _ in range(60):
            if tb - ta <= 1e-7:
                break
            tm = 0.5 * (ta + tb)
            Dm = diffs(tm)
            w = np.abs(_winding(Da[:-1], Da[1:], Dm[1:], Dm[:-1]))
            w = np.where(np.isfinite(w), w, 0.0)
            if np.any(w > 0.4):
                i = int(np.argmax(w))
                partner = 0.5 * (win[i] + win[i + 1])
                tb = tm
            else:
                ta, Da = tm, Dm
        t_mid = 0.5 * (ta + tb)
        polished = self._polish(theta, brc, partner, pbrc, t_mid)
        slack = 2.0 * (self.t_grid[1] - self.t_grid[0])
        if polished is not None and abs(polished - t_mid) < slack:
            return polished
        return t_mid

    def _polish(self, theta, brc, partner, pbrc, t):
        f, q = self.f, self.q
        s_main = initial_covectors(f, q, theta, brc).as_array()
        tp = float(partner)
        for _ in range(30):
            s_p = initial_covectors(f, q, tp, pbrc).as_array()
            out, _, _ = integrate_states(f, np.stack([s_main, s_p]), [t], variations=True, tol=self.tol)
            e0, e1 = out[0, 0], out[1, 0]
            F = e1[:2] - e0[:2]
            dlam = covector_derivative(f, q, tp, pbrc)
            dE = e1[4:].reshape(4, 4)[:2, 2:] @ dlam
            v = velocity(f, np.stack([e0[:4], e1[:4]]))
            Jm = np.column_stack([dE, v[1] - v[0]])
            try:
                step = np.linalg.solve(Jm, -F)
            except np.linalg.LinAlgError:
                return None
            tp += step[0]
            t += step[1]
            if t <= 0 or not np.all(np.isfinite(step)):
                return None
            if np.max(np.abs(step)) < 1e-13 * max(1.0, abs(t)):
                break
        else:
            return None
        if pbrc == brc and self._pdist(np.array(tp), theta) < 1e-6:
            return None
        return float(t)



def cut_time(f: Frame2, q, theta: float, tmax: float, branch: int = 1, tol: float = DEFAULT_TOL,
             n: Optional[int] = None, a_max: float = A_MAX) -> Optional[float]:
    """First time the geodesic ``(theta, branch)`` stops being optimal, or None before tmax.

    Capped by the first conjugate time.
    """
    t, _ = CutFinder(f, q, tmax, n=n, a_max=a_max, tol=tol).cut_time(theta, branch)
    return t


def cut_locus(f: Frame2, q, theta_grid, tmax: float, branches=None, tol: float = DEFAULT_TOL,
              n: Optional[int] = None, a_max: float = A_MAX):
    finder = CutFinder(f, q, tmax, n=n, a_max=a_max, tol=tol)
    theta_grid = np.asarray(theta_grid, dtype=float)
    if branches is None:
        branches = np.ones(len(theta_grid), int)
    pts = []
    for th, br in zip(theta_grid, branches):
        t, p = finder.cut_time(float(th), int(br))
        if t is not None:
            pts.append(LocusPoint("cut", float(th), t, tuple(map(float, p)), int(br)))
    return pts


# --------------------------------------------------------------------------
# Grushin closed forms


def grushin_geodesic_origin(sign: int, a: float, t: float):
    """Arclength geodesic of the Grushin plane from the origin with lam(0) = (sign, a)."""
    if sign not in (1, -1):
        raise InputError("sign must be +1 or -1")
    t = np.asarray(t, dtype=float)
    if a == 0:
        return np.stack([sign * t, np.zeros_like(t)], axis=-1)
    x = sign * np.sin(a * t) / a
    y = t / (2 * a) - np.sin(2 * a * t) / (4 * a * a)
    return np.stack([x, y], axis=-1)


def _m10_parts(a, t):
    if not (0 < a <= 1):
        raise InputError("a must lie in (0, 1]")
    t = np.asarray(t, dtype=float)
    r = math.sqrt(1.0 - a * a)
    c, s = np.cos(a * t), np.sin(a * t)
    s2 = np.sin(2 * a * t)
    xp = (-(a * c) + r * s) / a
    xm = (-(a * c) - r * s) / a
    yp = (-4 * a * r + 2 * a * t + 4 * a * r * c**2 - s2 + 2 * a * a * s2) / (4 * a * a)
    ym = (4 * a * r + 2 * a * t - 4 * a * r * c**2 - s2 + 2 * a * a * s2) / (4 * a * a)
    return xp, xm, yp, ym


def grushin_geodesic_m10(family: str, a: float, t, variant: str = "printed"):
    """Grushin geodesics from (-1, 0) in the four families G1..G4.

    ``variant="symmetric"`` evaluates G4 as (x^-, -y^-) instead of the
    printed (x^-, -y^+).
    """
    xp, xm, yp, ym = _m10_parts(a, t)
    fam = family.upper()
    if fam == "G1":
        x, y = xp, yp
    elif fam == "G2":
        x, y = xm, ym
    elif fam == "G3":
        x, y = xp, -yp
    elif fam == "G4":
        x, y = (xm, -ym) if variant == "symmetric" else (xm, -yp)
    else:
        raise InputError(f"unknown family {family!r}")
    return np.stack([x, y], axis=-1)


def m10_theta(family: str, a: float) -> float:
    """Angle theta (lam = (cos theta, -sin theta) at (-1, 0)) of a family member."""
    s = math.asin(a)
    return {"G1": -s, "G2": -math.pi + s, "G3": s, "G4": math.pi - s}[family.upper()]


def g4_variant_check(f: Frame2, a: float, tmax: float = 5.0, n: int = 51, tol: float = DEFAULT_TOL):
    """Compare the integrated G4 geodesic with both candidate closed forms."""
    ts = np.linspace(0.0, tmax, n)
    s0 = initial_covectors(f, (-1.0, 0.0), m10_theta("G4", a))
    out, _, _ = integrate_states(f, s0.as_array(), ts, tol=tol)
    path = out[0, :, :2]
    err = {
        v: float(np.max(np.abs(path - grushin_geodesic_m10("G4", a, ts, variant=v))))
        for v in ("printed", "symmetric")
    }
    err["match"] = min(("printed", "symmetric"), key=lambda v: err[v])
    return err
