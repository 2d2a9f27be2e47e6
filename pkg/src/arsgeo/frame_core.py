"""Charts, orthonormal frames, atlases, Lie brackets and point classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import expr_dsl as ed
from .errors import ConfigurationError, OutOfDomainError
from .expr_dsl import ScalarExpr, as_expr

__all__ = [
    "Chart",
    "VectorField2",
    "Frame2",
    "Overlap",
    "ARS2",
    "PointClass",
    "Polyline",
    "GenericityReport",
    "frame_det",
    "lie_bracket",
    "classify_point",
    "classify_points",
    "trace_singular_locus",
    "genericity_check",
    "orientability_check",
    "ORIENTABLE",
    "NON_ORIENTABLE",
]

ORIENTABLE = "orientable"
NON_ORIENTABLE = "non-orientable"
RANK_RTOL = 1e-9
Z_TOL = 1e-12


def _as_point(q):
    q = np.asarray(q, dtype=float)
    if q.shape != (2,):
        raise ValueError("a point is a pair (x, y)")
    return q


@dataclass(frozen=True)
class Chart:
    """A rectangular coordinate chart.

    ``domain`` is where the frame may be evaluated (bounds may be infinite);
    ``window`` is the finite rectangle used for grids, tracing and plots.
    ``periodic`` holds, per axis, ``False``, ``True`` (plain identification of
    opposite edges) or ``"twist"`` (``(x0, y) ~ (x1, y0 + y1 - y)``; only the
    x axis may be twisted).
    """

    name: str
    domain: tuple
    periodic: tuple = (False, False)
    window: Optional[tuple] = None
    embedding: Optional[tuple] = None

    def __post_init__(self):
        x0, x1, y0, y1 = (float(v) for v in self.domain)
        if not (x0 < x1 and y0 < y1):
            raise ConfigurationError(f"chart {self.name!r}: degenerate domain {self.domain}")
        object.__setattr__(self, "domain", (x0, x1, y0, y1))
        win = self.window if self.window is not None else self.domain
        win = tuple(float(v) for v in win)
        if not all(math.isfinite(v) for v in win):
            raise ConfigurationError(f"chart {self.name!r}: window must be finite")
        object.__setattr__(self, "window", win)
        if self.periodic[1] == "twist":
            raise ConfigurationError("only the x axis may carry a twisted identification")
        for axis, p in enumerate(self.periodic):
            lo, hi = self.domain[2 * axis], self.domain[2 * axis + 1]
            if p and not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigurationError(f"chart {self.name!r}: periodic axis needs finite bounds")
        if self.embedding is not None:
            object.__setattr__(self, "embedding", tuple(as_expr(e) for e in self.embedding))

    def is_periodic(self, axis):
        return bool(self.periodic[axis])

    def contains(self, q, tol=0.0):
        x, y = q
        x0, x1, y0, y1 = self.domain
        ok_x = self.is_periodic(0) or (x0 - tol <= x <= x1 + tol)
        ok_y = self.is_periodic(1) or (y0 - tol <= y <= y1 + tol)
        return bool(ok_x and ok_y)

    def check(self, q):
        q = _as_point(q)
        if not self.contains(q):
            raise OutOfDomainError(f"point {tuple(q)} outside chart {self.name!r} domain {self.domain}")
        return q

    def flow_bounds(self):
        """Bounds handed to the integrator: periodic axes are unbounded."""
        x0, x1, y0, y1 = self.domain
        lo = np.array([-np.inf if self.is_periodic(0) else x0, -np.inf if self.is_periodic(1) else y0])
        hi = np.array([np.inf if self.is_periodic(0) else x1, np.inf if self.is_periodic(1) else y1])
        return lo, hi

    def wrap(self, pts):
        """Map points into the fundamental domain of the periodic axes."""
        pts = np.array(pts, dtype=float, copy=True)
        x0, x1, y0, y1 = self.domain
        if self.periodic[0] is True:
            pts[..., 0] = x0 + np.mod(pts[..., 0] - x0, x1 - x0)
        elif self.periodic[0] == "twist":
            k = np.floor((pts[..., 0] - x0) / (x1 - x0))
            pts[..., 0] = pts[..., 0] - k * (x1 - x0)
            odd = np.mod(k, 2) != 0
            pts[..., 1] = np.where(odd, y0 + y1 - pts[..., 1], pts[..., 1])
        if self.periodic[1]:
            pts[..., 1] = y0 + np.mod(pts[..., 1] - y0, y1 - y0)
        return pts


class VectorField2:
    """A planar vector field with symbolic components and cached derivatives."""

    def __init__(self, u, v):
        self.u = as_expr(u)
        self.v = as_expr(v)

    @property
    def components(self):
        return (self.u, self.v)

    def __repr__(self):
        return f"VectorField2({self.u}, {self.v})"

    def __eq__(self, other):
        return isinstance(other, VectorField2) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    @cached_property
    def jacobian_exprs(self):
        return tuple(tuple(ed.diff(c, var) for var in "xy") for c in self.components)

    @cached_property
    def hessian_exprs(self):
        # per component: (xx, xy, yy)
        out = []
        for row in self.jacobian_exprs:
            out.append((ed.diff(row[0], "x"), ed.diff(row[0], "y"), ed.diff(row[1], "y")))
        return tuple(out)

    def value(self, x, y):
        return np.stack([ed.evaluate(self.u, x, y), ed.evaluate(self.v, x, y)], axis=-1)

    def jacobian(self, x, y):
        J = [[ed.evaluate(e, x, y) for e in row] for row in self.jacobian_exprs]
        return np.moveaxis(np.array(J, dtype=float), (0, 1), (-2, -1))

    def hessians(self, x, y):
        """Array ``(..., 2, 2, 2)``: ``H[..., c, k, l]`` = d2 component_c / dk dl."""
        H = []
        for xx, xy, yy in self.hessian_exprs:
            a, b, c = (ed.evaluate(e, x, y) for e in (xx, xy, yy))
            H.append([[a, b], [b, c]])
        return np.moveaxis(np.array(H, dtype=float), (0, 1, 2), (-3, -2, -1))

    def bracket(self, other: "VectorField2") -> "VectorField2":
        """Symbolic Lie bracket ``[self, other] = D(other) self - D(self) other``."""
        (a11, a12), (a21, a22) = other.jacobian_exprs
        (b11, b12), (b21, b22) = self.jacobian_exprs
        V, W = self.components, other.components
        u = ed.sub(ed.add(ed.mul(a11, V[0]), ed.mul(a12, V[1])), ed.add(ed.mul(b11, W[0]), ed.mul(b12, W[1])))
        v = ed.sub(ed.add(ed.mul(a21, V[0]), ed.mul(a22, V[1])), ed.add(ed.mul(b21, W[0]), ed.mul(b22, W[1])))
        return VectorField2(u, v)


class Frame2:
    """An ordered orthonormal frame ``(X, Y)`` on a chart."""

    def __init__(self, X, Y, chart: Chart):
        self.X = X if isinstance(X, VectorField2) else VectorField2(*X)
        self.Y = Y if isinstance(Y, VectorField2) else VectorField2(*Y)
        self.chart = chart

    def __repr__(self):
        return f"Frame2(X={self.X}, Y={self.Y}, chart={self.chart.name!r})"

    # symbolic data ------------------------------------------------------

    @cached_property
    def det_expr(self) -> ScalarExpr:
        X, Y = self.X, self.Y
        return ed.sub(ed.mul(X.u, Y.v), ed.mul(X.v, Y.u))

    @cached_property
    def bracket_field(self) -> VectorField2:
        return self.X.bracket(self.Y)

    @cached_property
    def flag_fields(self):
        B = self.bracket_field
        return (self.X, self.Y, B, self.X.bracket(B), self.Y.bracket(B))

    @cached_property
    def jet_exprs(self):
        comps = [self.X.u, self.X.v, self.Y.u, self.Y.v]
        fields = [self.X, self.X, self.Y, self.Y]
        first, second = [], []
        for i, f in enumerate(fields):
            c = i % 2
            first.extend(f.jacobian_exprs[c])
            second.extend(f.hessian_exprs[c])
        return tuple(comps + first + second)

    @cached_property
    def program(self):
        return ed.compile_program(self.jet_exprs)

    @cached_property
    def is_normal_form(self):
        """True when X = (1, 0) and Y = (0, f); then ``normal_form_f`` is f."""
        return (
            self.X.u == ed.Const(1.0)
            and self.X.v == ed.Const(0.0)
            and self.Y.u == ed.Const(0.0)
        )

    @property
    def normal_form_f(self):
        if not self.is_normal_form:
            raise ConfigurationError("frame is not of the form X=(1,0), Y=(0,f)")
        return self.Y.v

    # numerics -----------------------------------------------------------

    def matrix(self, x, y):
        """F with columns X, Y; shape ``(..., 2, 2)``."""
        Xv = self.X.value(x, y)
        Yv = self.Y.value(x, y)
        return np.stack([Xv, Yv], axis=-1)

    def det(self, x, y):
        return ed.evaluate(self.det_expr, x, y)

    def jet(self, x, y):
        """Values of the 24 jet expressions, last axis of length 24."""
        return np.stack([np.broadcast_to(ed.evaluate(e, x, y), np.broadcast(np.asarray(x), np.asarray(y)).shape)
                         for e in self.jet_exprs], axis=-1)


@dataclass
class Overlap:
    """Overlap of charts ``i`` and ``j``.

    ``components`` lists, per connected component, sample points in chart-i
    coordinates. ``transition`` maps chart-i to chart-j coordinates (identity
    when omitted).
    """

    i: int
    j: int
    components: list
    transition: Optional[tuple] = None

    def __post_init__(self):
        if self.transition is not None:
            self.transition = tuple(as_expr(e) for e in self.transition)

    def to_j(self, p):
        if self.transition is None:
            return np.asarray(p, dtype=float)
        return np.array([ed.evaluate(e, p[0], p[1]) for e in self.transition])

    def transition_det(self, p):
        if self.transition is None:
            return 1.0
        J = [[ed.evaluate(ed.diff(e, v), p[0], p[1]) for v in "xy"] for e in self.transition]
        return float(np.linalg.det(np.array(J)))

    def transition_jacobian(self, p):
        if self.transition is None:
            return np.eye(2)
        return np.array([[ed.evaluate(ed.diff(e, v), p[0], p[1]) for v in "xy"] for e in self.transition])


@dataclass
class ARS2:
    """An atlas of orthonormal frames with overlap data and metadata."""

    frames: list
    overlaps: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    distribution_only: bool = False

    def __post_init__(self):
        if not self.frames:
            raise ConfigurationError("an atlas needs at least one frame")
        for ov in self.overlaps:
            if not (0 <= ov.i < len(self.frames) and 0 <= ov.j < len(self.frames)):
                raise ConfigurationError(f"overlap refers to unknown chart ({ov.i}, {ov.j})")
            for comp in ov.components:
                if not comp:
                    raise ConfigurationError("every overlap component needs a sample point")
                for p in comp:
                    if not self.frames[ov.i].chart.contains(p):
                        raise ConfigurationError(f"overlap sample {p} outside chart {ov.i}")
                    if not self.frames[ov.j].chart.contains(ov.to_j(p)):
                        raise ConfigurationError(f"overlap sample {p} outside chart {ov.j}")

    @property
    def frame(self) -> Frame2:
        """The frame of a single-chart structure."""
        if len(self.frames) != 1:
            raise ConfigurationError("operation needs a single-chart structure")
        return self.frames[0]

    def change_of_frame(self, ov: Overlap, p):
        """Matrix R with (X^j, Y^j) = (X^i, Y^i) R, in chart-i coordinates at p."""
        Fi = self.frames[ov.i].matrix(p[0], p[1])
        qj = ov.to_j(p)
        Fj = self.frames[ov.j].matrix(qj[0], qj[1])
        Fj_in_i = np.linalg.solve(ov.transition_jacobian(p), Fj)
        return np.linalg.solve(Fi, Fj_in_i)

    def check_overlaps(self, tol=1e-8):
        """Orthogonality of change-of-frame matrices (skipped for distributions)."""
        if self.distribution_only:
            return True
        for ov in self.overlaps:
            for comp in ov.components:
                for p in comp:
                    R = self.change_of_frame(ov, p)
                    if np.max(np.abs(R.T @ R - np.eye(2))) > tol:
                        return False
        return True


# --------------------------------------------------------------------------
# pointwise operations


def frame_det(f: Frame2, q) -> float:
    q = f.chart.check(q)
    return float(f.det(q[0], q[1]))


def lie_bracket(V: VectorField2, W: VectorField2, q) -> np.ndarray:
    """``[V, W](q) = DW(q) V(q) - DV(q) W(q)`` from symbolic Jacobians."""
    q = _as_point(q)
    x, y = q
    return W.jacobian(x, y) @ V.value(x, y) - V.jacobian(x, y) @ W.value(x, y)


@dataclass(frozen=True)
class PointClass:
    kind: str
    dims: tuple

    def __str__(self):
        return f"{self.kind} ({self.dims[0]},{self.dims[1]},{self.dims[2]})"


def _rank(mats):
    s = np.linalg.svd(mats, compute_uv=False)
    tol = RANK_RTOL * (s[..., :1] + 1.0)
    return np.sum(s > tol, axis=-1)


def _kind(d1, d2, d3):
    if d3 < 2:
        return "NonGeneric"
    if d1 == 2:
        return "Ordinary"
    if d2 == 2:
        return "Grushin"
    return "Tangency"


def classify_points(f: Frame2, xs, ys):
    """Flag dimensions ``(N, 3)`` at many points."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    vals = [F.value(xs, ys) for F in f.flag_fields]
    cols = np.stack(vals, axis=-1)  # (N, 2, 5)
    d1 = _rank(cols[..., :2])
    d2 = _rank(cols[..., :3])
    d3 = _rank(cols)
    return np.stack([d1, d2, d3], axis=-1)


def classify_point(f: Frame2, q) -> PointClass:
    q = f.chart.check(q)
    d = classify_points(f, q[0], q[1])[0]
    dims = tuple(int(v) for v in d)
    return PointClass(_kind(*dims), dims)


# --------------------------------------------------------------------------
# singular locus


@dataclass
class Polyline:
    """A traced component of the singular locus.

    ``zeta`` is a defining function vanishing on the component with
    non-zero gradient there: the frame determinant itself, or one of its
    partial derivatives when the determinant does not change sign.
    """

    points: np.ndarray
    closed: bool
    chart: str
    zeta: ScalarExpr
    degenerate: bool = False


def _grid_axes(chart: Chart, n: int):
    x0, x1, y0, y1 = chart.window
    axes = []
    for axis, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        per = chart.is_periodic(axis) and (lo, hi) == chart.domain[2 * axis: 2 * axis + 2]
        npts = n if per else n + 1
        axes.append((np.linspace(lo, hi, n + 1)[:npts], per, (hi - lo) / n))
    return axes


def _marching(expr: ScalarExpr, chart: Chart, n: int):
    (xs, perx, hx), (ys, pery, hy) = _grid_axes(chart, n)
    nx, ny = len(xs), len(ys)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    D = np.asarray(ed.evaluate(expr, XX, YY), dtype=float)
    S = D >= 0.0
    x0, y0 = chart.window[0], chart.window[2]

    def node(i, j):
        return i % nx, j % ny

    def coord(i, j):
        return x0 + i * hx, y0 + j * hy

    def fval(x, y):
        return float(ed.evaluate(expr, x, y))

    cache = {}

    def crossing(key):
        if key in cache:
            return cache[key]
        kind, i, j = key
        xa, ya = coord(i, j)
        if kind == "h":
            xb, yb = xa + hx, ya
        else:
            xb, yb = xa, ya + hy
        fa, fb = fval(xa, ya), fval(xb, yb)
        if fa == 0.0:
            s = 0.0
        elif fb == 0.0:
            s = 1.0
        elif (fa > 0) == (fb > 0):
            # seam of a periodic axis: node values differ only by rounding
            s = 0.0 if abs(fa) <= abs(fb) else 1.0
        else:
            s = brentq(lambda s: fval(xa + s * (xb - xa), ya + s * (yb - ya)), 0.0, 1.0,
                       xtol=1e-16, rtol=9e-16, maxiter=200)
        p = (xa + s * (xb - xa), ya + s * (yb - ya))
        cache[key] = p
        return p

    def ekey(kind, i, j):
        i2, j2 = node(i, j)
        return (kind, i2, j2)

    segments = []
    for i in range(n):
        for j in range(n):
            c = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]
            s = [S[a] for a in c]
            edges = []
            if s[0] != s[1]:
                edges.append(ekey("h", i, j))
            if s[1] != s[2]:
                edges.append(ekey("v", i + 1, j))
            if s[2] != s[3]:
                edges.append(ekey("h", i, j + 1))
            if s[3] != s[0]:
                edges.append(ekey("v", i, j))
            if len(edges) == 2:
                segments.append((edges[0], edges[1]))
            elif len(edges) == 4:
                cx, cy = coord(i + 0.5, j + 0.5)
                centre = fval(cx, cy) >= 0.0
                e0, e1, e2, e3 = ekey("h", i, j), ekey("v", i + 1, j), ekey("h", i, j + 1), ekey("v", i, j)
                if centre == s[0]:
                    segments += [(e0, e1), (e2, e3)]
                else:
                    segments += [(e3, e0), (e1, e2)]
    # chain segments
    adj = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    used = set()
    chains = []
    starts = sorted(k for k, v in adj.items() if len(v) == 1) + sorted(adj)
    for start in starts:
        if start in used:
            continue
        chain = [start]
        used.add(start)
        prev, cur = None, start
        closed = False
        while True:
            nxt = [k for k in adj[cur] if k != prev and k not in used]
            if not nxt:
                closed = len(chain) > 2 and start in adj[cur] and prev is not None
                break
            prev, cur = cur, nxt[0]
            chain.append(cur)
            used.add(cur)
        pts = [crossing(k) for k in chain]
        # a zero on a grid node is reached from two edges; keep it once
        dedup = [pts[0]]
        for p in pts[1:]:
            if abs(p[0] - dedup[-1][0]) + abs(p[1] - dedup[-1][1]) > 1e-14:
                dedup.append(p)
        if closed and len(dedup) > 1 and abs(dedup[0][0] - dedup[-1][0]) + abs(dedup[0][1] - dedup[-1][1]) <= 1e-14:
            dedup.pop()
        chains.append((np.array(dedup), closed))
    return chains


def trace_singular_locus(f: Frame2, grid_n: int = 128) -> list:
    """Contour the singular locus ``det F = 0`` over the chart window.

    Components where the determinant does not change sign are recovered by
    contouring its partial derivatives and keeping the curves on which the
    determinant vanishes.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    chart = f.chart
    D = f.det_expr
    out = []
    for pts, closed in _marching(D, chart, grid_n):
        out.append(Polyline(pts, closed, chart.name, D, False))
    scale = 1.0 + float(np.max(np.abs(ed.evaluate(D, *np.meshgrid(
        np.linspace(*chart.window[:2], 9), np.linspace(*chart.window[2:], 9))))))
    for var in "xy":
        dD = ed.diff(D, var)
        if isinstance(dD, ed.Const):
            continue
        for pts, closed in _marching(dD, chart, grid_n):
            vals = np.abs(ed.evaluate(D, pts[:, 0], pts[:, 1]))
            if np.max(vals) > 1e-8 * scale:
                continue
            if any(_near(pts, p.points, chart) for p in out):
                continue
            out.append(Polyline(pts, closed, chart.name, dD, True))
    return out


def _near(a, b, chart):
    d = np.abs(a[len(a) // 2] - b)
    return bool(np.min(np.hypot(d[:, 0], d[:, 1])) < 1e-6)


# --------------------------------------------------------------------------
# genericity


@dataclass
class GenericityReport:
    embedded: bool
    isolated_tangencies: bool
    bracket_generating: bool
    tangency_points: list

    @property
    def generic(self):
        return self.embedded and self.isolated_tangencies and self.bracket_generating

    def as_tuple(self):
        return (self.embedded, self.isolated_tangencies, self.bracket_generating)


def _tangency_function(f: Frame2, pts, ref=None):
    """det[v, [X, Y]] along Z, with v the dominant (normalised) frame vector.

    v is oriented continuously along ``pts``, or along ``ref`` when given,
    so that sign changes of the result mark tangency points.
    """
    x, y = pts[:, 0], pts[:, 1]
    Xv = f.X.value(x, y)
    Yv = f.Y.value(x, y)
    B = f.bracket_field.value(x, y)
    nx = np.hypot(Xv[:, 0], Xv[:, 1])
    ny = np.hypot(Yv[:, 0], Yv[:, 1])
    v = np.where((nx >= ny)[:, None], Xv, Yv)
    nv = np.maximum(nx, ny)
    v = v / np.where(nv > 0, nv, 1.0)[:, None]
    if ref is not None:
        v = v * np.where(v @ np.asarray(ref, dtype=float) < 0, -1.0, 1.0)[:, None]
    else:
        for k in range(1, len(v)):
            if v[k] @ v[k - 1] < 0:
                v[k] = -v[k]
    tau = v[:, 0] * B[:, 1] - v[:, 1] * B[:, 0]
    scale = 1.0 + np.hypot(B[:, 0], B[:, 1])
    return tau, scale, v


def _project(zeta, p):
    """Newton projection of ``p`` onto ``zeta = 0`` along the gradient."""
    gx, gy = ed.diff(zeta, "x"), ed.diff(zeta, "y")
    p = np.array(p, dtype=float)
    for _ in range(50):
        z = ed.evaluate(zeta, p[0], p[1])
        g = np.array([ed.evaluate(gx, p[0], p[1]), ed.evaluate(gy, p[0], p[1])])
        gg = g @ g
        if gg == 0.0:
            break
        step = z * g / gg
        p = p - step
        if np.hypot(*step) < 1e-15:
            break
    return p


def genericity_check(f: Frame2, grid_n: int = 64) -> GenericityReport:
    """Check the three generic conditions on the chart window.

    (i) the singular locus is an embedded curve (|grad det| > 1e-6 on it);
    (ii) tangency points are isolated at the grid resolution;
    (iii) X, Y and brackets up to length three span the plane at every grid point.
    """
    chart = f.chart
    locus = trace_singular_locus(f, grid_n)
    gdx, gdy = ed.diff(f.det_expr, "x"), ed.diff(f.det_expr, "y")
    embedded = True
    isolated = True
    tangencies = []
    h = max(chart.window[1] - chart.window[0], chart.window[3] - chart.window[2]) / grid_n
    for comp in locus:
        pts = comp.points
        g = np.hypot(ed.evaluate(gdx, pts[:, 0], pts[:, 1]), ed.evaluate(gdy, pts[:, 0], pts[:, 1]))
        if np.any(np.asarray(g) <= 1e-6):
            embedded = False
        tau, scale, dirs = _tangency_function(f, pts)
        zero = np.abs(tau) <= 1e-9 * scale
        n = len(pts)
        m = n if comp.closed else n - 1
        for k in range(m):
            a, b = k, (k + 1) % n
            if zero[a] and zero[b]:
                isolated = False
            elif zero[a]:
                tangencies.append(pts[a])
            elif not zero[b] and np.sign(tau[a]) != np.sign(tau[b]) * np.sign(dirs[a] @ dirs[b]):
                if np.hypot(*(pts[b] - pts[a])) > 2 * h:  # seam jump of a periodic chart
                    continue
                tangencies.append(_bisect_tangency(f, comp, pts[a], pts[b], tau[a], dirs[a]))
        if not comp.closed and zero[-1] and not zero[-2]:
            tangencies.append(pts[-1])
    # dedupe and test isolation
    uniq = []
    for p in tangencies:
        if all(np.hypot(*(p - u)) > 1e-9 for u in uniq):
            uniq.append(p)
    for a in range(len(uniq)):
        for b in range(a + 1, len(uniq)):
            if np.hypot(*(uniq[a] - uniq[b])) <= h * math.sqrt(2):
                isolated = False
    # (iii)
    (xs, _, _), (ys, _, _) = _grid_axes(chart, grid_n)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    dims = classify_points(f, XX.ravel(), YY.ravel())
    bracket_generating = bool(np.all(dims[:, 2] == 2))
    tang = [tuple(float(c) for c in p) for p in uniq] if isolated else []
    return GenericityReport(embedded, isolated, bracket_generating, tang)


def _bisect_tangency(f, comp, pa, pb, ta, ref):
    a, b = 0.0, 1.0
    p = pa
    for _ in range(80):
        m = 0.5 * (a + b)
        p = _project(comp.zeta, pa + m * (pb - pa))
        tm = _tangency_function(f, p[None, :], ref)[0][0]
        if tm == 0.0:
            break
        if np.sign(tm) == np.sign(ta):
            a = m
        else:
            b = m
        if b - a < 1e-15:
            break
    return p


# --------------------------------------------------------------------------
# orientability


def orientability_check(a: ARS2) -> str:
    """Decide orientability from signs of change-of-frame determinants.

    Charts are graph nodes; every overlap component contributes an edge
    labelled by the sign of det R at its sample point. The structure is
    orientable iff the nodes admit a +-1 labelling consistent with all edges.
    """
    n = len(a.frames)
    if n == 1 and not a.overlaps:
        return ORIENTABLE
    parent = list(range(n))
    parity = [0] * n

    def find(i):
        if parent[i] == i:
            return i, 0
        r, p = find(parent[i])
        parent[i] = r
        parity[i] ^= p
        return r, parity[i]

    for ov in a.overlaps:
        Fi, Fj = a.frames[ov.i], a.frames[ov.j]
        for comp in ov.components:
            p = np.asarray(comp[0], dtype=float)
            di = float(Fi.det(p[0], p[1]))
            qj = ov.to_j(p)
            dj = float(Fj.det(qj[0], qj[1]))
            if abs(di) <= Z_TOL or abs(dj) <= Z_TOL:
                raise ConfigurationError(
                    f"overlap sample {tuple(p)} lies on the singular locus of a frame"
                )
            sign = np.sign(di) * np.sign(dj) * np.sign(ov.transition_det(p))
            edge = 0 if sign > 0 else 1
            ri, pi = find(ov.i)
            rj, pj = find(ov.j)
            if ri == rj:
                if pi ^ pj != edge:
                    return NON_ORIENTABLE
            else:
                parent[ri] = rj
                parity[ri] = pi ^ pj ^ edge
    return ORIENTABLE


def edge_consistency(chart: Chart, frame: "Frame2", n: int = 32, tol: float = 1e-10) -> bool:
    """Frame values agree at identified edges of periodic axes."""
    x0, x1, y0, y1 = chart.domain
    wx0, wx1, wy0, wy1 = chart.window
    ok = True
    if chart.periodic[0]:
        s = np.linspace(wy0, wy1, n)
        A = frame.matrix(np.full(n, x0), s)
        if chart.periodic[0] == "twist":
            B = frame.matrix(np.full(n, x1), y0 + y1 - s)
            flip = np.diag([1.0, -1.0])
            A = flip @ A
        else:
            B = frame.matrix(np.full(n, x1), s)
        ok &= bool(np.max(np.abs(A - B)) <= tol)
    if chart.periodic[1]:
        s = np.linspace(wx0, wx1, n)
        A = frame.matrix(s, np.full(n, y0))
        B = frame.matrix(s, np.full(n, y1))
        ok &= bool(np.max(np.abs(A - B)) <= tol)
    return ok
