"""Normal geodesics as trajectories of the Hamiltonian flow on the cotangent bundle.

With ``a = <lam, X>`` and ``b = <lam, Y>`` the Hamiltonian is
``H = (a^2 + b^2) / 2`` and the flow reads ``q' = a X + b Y``,
``lam' = -(a grad a + b grad b)``. Variations solve ``M' = A M``, with
``A`` the linearisation built from second derivatives of the frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import (
    ChartExitError,
    DomainError,
    NumericError,
    StepSizeUnderflow,
    TangencyError,
)
from .frame_core import Z_TOL, Frame2, classify_point

__all__ = [
    "CotangentState",
    "Geodesic",
    "VariationalFrame",
    "Front",
    "hamiltonian",
    "hamiltonian_values",
    "initial_covectors",
    "covector_derivative",
    "exp_map",
    "flow_with_variations",
    "integrate_states",
    "front",
    "A_MAX",
]

DEFAULT_TOL = 1e-10
A_MAX = 50.0
MAX_STEPS = 5_000_000
OMEGA = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


@dataclass(frozen=True)
class CotangentState:
    x: float
    y: float
    lx: float
    ly: float

    @property
    def q(self):
        return np.array([self.x, self.y])

    @property
    def lam(self):
        return np.array([self.lx, self.ly])

    def as_array(self):
        return np.array([self.x, self.y, self.lx, self.ly])


def hamiltonian_values(f: Frame2, states):
    """H for an array of states ``(..., 4)``."""
    s = np.asarray(states, dtype=float)
    F = f.matrix(s[..., 0], s[..., 1])
    ab = np.einsum("...ci,...c->...i", F, s[..., 2:4])
    return 0.5 * np.sum(ab * ab, axis=-1)


def hamiltonian(f: Frame2, s: CotangentState) -> float:
    f.chart.check(s.q)
    return float(hamiltonian_values(f, s.as_array()))


def _on_z(f: Frame2, q):
    return abs(float(f.det(q[0], q[1]))) <= Z_TOL


def _z_basis(f: Frame2, q):
    """Direction data at a Grushin point: (u, n) with lam = branch u/|u|^2 + a n."""
    Xv = f.X.value(q[0], q[1])
    Yv = f.Y.value(q[0], q[1])
    e = Xv if np.hypot(*Xv) >= np.hypot(*Yv) else Yv
    e = e / np.hypot(*e)
    c1, c2 = Xv @ e, Yv @ e
    u = math.hypot(c1, c2) * e
    n = np.array([-u[1], u[0]]) / np.hypot(*u)
    return u, n


def initial_covectors(f: Frame2, q, theta: float, branch: int = 1) -> CotangentState:
    """Initial covector with H = 1/2.

    Off the singular locus ``<lam, X> = cos(theta)``, ``<lam, Y> = sin(theta)``.
    At a Grushin point the level set H = 1/2 is a pair of parallel lines;
    ``branch`` picks the line and ``theta`` is the coordinate ``a`` along it:
    ``lam = branch * u / |u|^2 + a * n`` with ``u`` spanning the frame's
    direction and ``n`` the unit normal to it. For the Grushin plane at the
    origin this is ``lam = (branch, a)``.
    """
    q = f.chart.check(q)
    if _on_z(f, q):
        pc = classify_point(f, q)
        if pc.kind != "Grushin":
            raise TangencyError(f"{pc} point at {tuple(q)}: no covector parameterisation")
        u, n = _z_basis(f, q)
        lam = branch * u / (u @ u) + theta * n
    else:
        F = f.matrix(q[0], q[1])
        lam = np.linalg.solve(F.T, np.array([math.cos(theta), math.sin(theta)]))
    return CotangentState(float(q[0]), float(q[1]), float(lam[0]), float(lam[1]))


def covector_derivative(f: Frame2, q, theta: float, branch: int = 1) -> np.ndarray:
    """d lam / d theta for the parameterisation of :func:`initial_covectors`."""
    q = np.asarray(q, dtype=float)
    if _on_z(f, q):
        return _z_basis(f, q)[1]
    F = f.matrix(q[0], q[1])
    return np.linalg.solve(F.T, np.array([-math.sin(theta), math.cos(theta)]))


# --------------------------------------------------------------------------
# integration plumbing


def _raise_status(status, t_end, what="trajectory"):
    if status == K.OK:
        return
    if status == K.CHART_EXIT:
        raise ChartExitError(f"{what} left the chart domain at t={t_end:.17g}", t_end)
    if status == K.UNDERFLOW:
        raise StepSizeUnderflow(f"{what}: step size underflow at t={t_end:.17g}")
    if status == K.DOMAIN:
        raise DomainError(f"{what}: frame evaluation failed near t={t_end:.17g}")
    raise NumericError(f"{what}: integration aborted (status {status}) at t={t_end:.17g}")


def _initial_array(states, variations):
    s = np.atleast_2d(np.asarray(states, dtype=float))
    if not variations:
        return np.ascontiguousarray(s[:, :4])
    y0 = np.zeros((s.shape[0], 20))
    y0[:, :4] = s[:, :4]
    y0[:, 4:] = np.eye(4).ravel()
    return y0


def integrate_states(f: Frame2, states, t_out, variations=False, tol=DEFAULT_TOL, strict=True):
    """Integrate many initial states, sampling at the sorted times ``t_out``.

    Returns ``(out, status, t_end)`` with ``out`` of shape
    ``(n, len(t_out), 4 or 20)``. With ``strict`` any failure raises.
    """
    t_out = np.ascontiguousarray(np.asarray(t_out, dtype=float))
    if np.any(np.diff(t_out) < 0) or (len(t_out) and t_out[0] < 0):
        raise ValueError("output times must be sorted and non-negative")
    y0 = _initial_array(states, variations)
    p = f.program
    lo, hi = f.chart.flow_bounds()
    out, status, t_end = K.integrate_batch(
        p.ops, p.args, p.consts, p.starts, p.stack_size, y0, t_out,
        1 if variations else 0, tol, tol, lo, hi, MAX_STEPS,
    )
    if strict:
        for st, te in zip(status, t_end):
            _raise_status(int(st), float(te))
    return out, status, t_end


def _record(f: Frame2, state, tmax, variations, tol):
    p = f.program
    lo, hi = f.chart.flow_bounds()
    y0 = _initial_array(state, variations)[0]
    cap = 4096
    while True:
        ts, ys, ks, st, te = K.integrate_record(
            p.ops, p.args, p.consts, p.starts, p.stack_size, y0, float(tmax),
            1 if variations else 0, tol, tol, lo, hi, MAX_STEPS, cap,
        )
        if st != K.BUFFER_FULL:
            break
        cap *= 2
    _raise_status(int(st), float(te))
    return ts, ys, ks


@dataclass
class Geodesic:
    """A normal geodesic on its adaptive mesh, with 4th-order dense output."""

    times: np.ndarray
    states: np.ndarray
    H0: float
    source: dict
    _full: np.ndarray = field(repr=False, default=None)
    _stages: np.ndarray = field(repr=False, default=None)

    def _dense(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ts = self.times
        if np.any(t < ts[0] - 1e-15) or np.any(t > ts[-1] + 1e-12 * max(1.0, ts[-1])):
            raise ValueError("time outside the integrated interval")
        idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
        h = ts[idx + 1] - ts[idx]
        th = ((t - ts[idx]) / h)[:, None]
        P = K.DENSE_P
        w = P[:, 0] * th + P[:, 1] * th**2 + P[:, 2] * th**3 + P[:, 3] * th**4  # (n, 7)
        k = self._stages[idx]  # (n, 7, dim)
        return self._full[idx] + h[:, None] * np.einsum("nj,njd->nd", w, k)

    def at(self, t):
        """State(s) ``(x, y, lx, ly)`` at time(s) ``t``."""
        r = self._dense(t)[:, :4]
        return r[0] if np.ndim(t) == 0 else r

    def point(self, t):
        return self.at(t)[..., :2]

    @property
    def tmax(self):
        return float(self.times[-1])


@dataclass
class VariationalFrame:
    """Flow Jacobian ``M(t)`` (4x4) along a geodesic, M(0) = identity."""

    times: np.ndarray
    M: np.ndarray
    geodesic: Geodesic = field(repr=False, default=None)

    def at(self, t):
        r = self.geodesic._dense(t)[:, 4:].reshape(-1, 4, 4)
        return r[0] if np.ndim(t) == 0 else r

    def symplectic_defect(self):
        D = np.einsum("nji,jk,nkl->nil", self.M, OMEGA, self.M) - OMEGA
        return float(np.max(np.abs(D)))


def _source(q, theta, branch, on_z):
    if on_z:
        return {"base": tuple(map(float, q)), "a": float(theta), "branch": int(branch)}
    return {"base": tuple(map(float, q)), "theta": float(theta)}


def geodesic(f: Frame2, q, theta, tmax, tol=DEFAULT_TOL, branch=1, variations=False):
    s0 = initial_covectors(f, q, theta, branch)
    ts, ys, ks = _record(f, s0.as_array(), tmax, variations, tol)
    g = Geodesic(ts, ys[:, :4].copy(), hamiltonian(f, s0), _source(q, theta, branch, _on_z(f, np.asarray(q, float))), ys, ks)
    return g


def exp_map(f: Frame2, q, theta: float, t: float, tol: float = DEFAULT_TOL, branch: int = 1) -> np.ndarray:
    """Endpoint at time ``t`` of the geodesic with initial covector ``(theta, branch)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    s0 = initial_covectors(f, q, theta, branch)
    out, _, _ = integrate_states(f, s0.as_array(), [float(t)], tol=tol)
    return out[0, 0, :2].copy()


def flow_with_variations(f: Frame2, q, theta: float, tmax: float, tol: float = DEFAULT_TOL, branch: int = 1):
    """Geodesic plus the flow Jacobian on the adaptive mesh."""
    if tmax <= 0:
        raise ValueError("tmax must be positive")
    g = geodesic(f, q, theta, tmax, tol, branch, variations=True)
    M = g._full[:, 4:].reshape(-1, 4, 4)
    return g, VariationalFrame(g.times, M, g)


def velocity(f: Frame2, states):
    """q' = F F^T lam for states ``(..., >=4)``."""
    s = np.asarray(states, dtype=float)
    F = f.matrix(s[..., 0], s[..., 1])
    return np.einsum("...ij,...kj,...k->...i", F, F, s[..., 2:4])


# --------------------------------------------------------------------------
# fronts


@dataclass
class Front:
    """Endpoints at a fixed time, ordered along the parameter.

    ``theta`` holds the angle (ordinary base point) or the line coordinate
    ``a`` (Grushin base point); ``branch`` is +-1 on covector lines and 0 on
    the ellipse.
    """

    t: float
    theta: np.ndarray
    branch: np.ndarray
    points: np.ndarray
    closed: bool


def front_parameters(f: Frame2, q, n: int, a_max: float = A_MAX):
    """Parameter nodes of a front: (theta, branch, closed)."""
    if n < 8:
        raise ValueError("a front needs n >= 8 samples")
    q = np.asarray(q, dtype=float)
    if _on_z(f, q):
        m = n // 2
        m -= 1 - m % 2  # odd, so a = 0 is a node
        a = np.linspace(-a_max, a_max, m)
        theta = np.concatenate([a, a[::-1]])
        branch = np.concatenate([np.ones(m, int), -np.ones(m, int)])
        return theta, branch, False
    theta = -math.pi + 2 * math.pi * np.arange(n) / n
    return theta, np.zeros(n, int), True


def initial_states(f: Frame2, q, theta, branch):
    return np.array([initial_covectors(f, q, th, b if b else 1).as_array() for th, b in zip(theta, branch)])


def front(f: Frame2, q, t: float, n: int = 720, tol: float = DEFAULT_TOL, a_max: float = A_MAX) -> Front:
    theta, branch, closed = front_parameters(f, q, n, a_max)
    s0 = initial_states(f, q, theta, branch)
    out, _, _ = integrate_states(f, s0, [float(t)], tol=tol)
    return Front(float(t), theta, branch, out[:, 0, :2].copy(), closed)
