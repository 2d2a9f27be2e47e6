"""Compiled kernels: frame bytecode interpreter and a Dormand-Prince 5(4) integrator.

The integrator is frame-agnostic: a frame arrives as a flat postfix program
(see :func:`arsgeo.expr_dsl.compile_program`) holding 24 expressions, laid out as

* ``0..3``    values ``Xu, Xv, Yu, Yv`` (index ``2*field + comp``)
* ``4..11``   first partials, index ``4 + (2*field + comp)*2 + k``
* ``12..23``  second partials, index ``12 + (2*field + comp)*3 + m`` with
  ``m`` = 0, 1, 2 for xx, xy, yy

so one compiled integrator serves every scenario and can be cached on disk.
"""

import math
import os

import numba
import numpy as np
from numba import njit, prange

# ---------------------------------------------------------------------------
# threading

# the portable layer avoids warnings from outdated TBB installations
if os.environ.get("NUMBA_THREADING_LAYER") is None:
    numba.config.THREADING_LAYER = "workqueue"

_threads = os.environ.get("ARSGEO_THREADS")
if _threads:
    try:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        pass

# ---------------------------------------------------------------------------
# status codes

OK = 0
CHART_EXIT = 1
UNDERFLOW = 2
DOMAIN = 3
MAX_STEPS = 4
BUFFER_FULL = 5

# ---------------------------------------------------------------------------
# Dormand-Prince tableau with the classic 4th-order continuous extension

_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array(
    [-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40]
)
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

DENSE_P = _P  # exported for dense evaluation in Python


# ---------------------------------------------------------------------------
# bytecode


@njit(cache=True)
def eval_expr(ops, args, consts, lo, hi, x, y, stack):
    """Evaluate one postfix expression; returns (value, error flag)."""
    sp = 0
    for i in range(lo, hi):
        op = ops[i]
        if op == 0:
            stack[sp] = consts[args[i]]
            sp += 1
        elif op == 1:
            stack[sp] = x
            sp += 1
        elif op == 2:
            stack[sp] = y
            sp += 1
        elif op == 3:
            stack[sp - 1] = -stack[sp - 1]
        elif op < 10:
            v = stack[sp - 1]
            if op == 4:
                r = math.sin(v)
            elif op == 5:
                r = math.cos(v)
            elif op == 6:
                r = math.tan(v)
            elif op == 7:
                if v > 709.0:
                    return np.nan, 1
                r = math.exp(v)
            elif op == 8:
                if v <= 0.0:
                    return np.nan, 1
                r = math.log(v)
            else:
                if v < 0.0:
                    return np.nan, 1
                r = math.sqrt(v)
            stack[sp - 1] = r
        else:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == 10:
                r = a + b
            elif op == 11:
                r = a - b
            elif op == 12:
                r = a * b
            elif op == 13:
                if b == 0.0:
                    return np.nan, 1
                r = a / b
            else:
                if a < 0.0 and b != math.floor(b):
                    return np.nan, 1
                if a == 0.0 and b < 0.0:
                    return np.nan, 1
                r = a**b
            stack[sp - 1] = r
    r = stack[0]
    if not math.isfinite(r):
        return np.nan, 1
    return r, 0


@njit(cache=True)
def frame_jet(ops, args, consts, starts, nexpr, x, y, jet, stack):
    for k in range(nexpr):
        v, err = eval_expr(ops, args, consts, starts[k], starts[k + 1], x, y, stack)
        if err:
            return 1
        jet[k] = v
    return 0


@njit(cache=True)
def eval_many(ops, args, consts, starts, nexpr, xs, ys, stack_size):
    """Evaluate the first ``nexpr`` programs at each point; NaN marks domain errors."""
    n = xs.shape[0]
    out = np.empty((n, nexpr))
    stack = np.empty(stack_size)
    jet = np.empty(nexpr)
    for i in range(n):
        if frame_jet(ops, args, consts, starts, nexpr, xs[i], ys[i], jet, stack):
            out[i, :] = np.nan
        else:
            out[i, :] = jet
    return out


# ---------------------------------------------------------------------------
# Hamiltonian vector field, optionally with the variational equation


@njit(cache=True)
def hamiltonian_rhs(ops, args, consts, starts, s, nvar, out, jet, stack, A):
    nexpr = 24 if nvar else 12
    if frame_jet(ops, args, consts, starts, nexpr, s[0], s[1], jet, stack):
        return 1
    X0 = jet[0]
    X1 = jet[1]
    Y0 = jet[2]
    Y1 = jet[3]
    l0 = s[2]
    l1 = s[3]
    a = l0 * X0 + l1 * X1
    b = l0 * Y0 + l1 * Y1
    # d_k a = sum_i l_i d_k X_i
    da0 = l0 * jet[4] + l1 * jet[6]
    da1 = l0 * jet[5] + l1 * jet[7]
    db0 = l0 * jet[8] + l1 * jet[10]
    db1 = l0 * jet[9] + l1 * jet[11]
    out[0] = a * X0 + b * Y0
    out[1] = a * X1 + b * Y1
    out[2] = -(a * da0 + b * db0)
    out[3] = -(a * da1 + b * db1)
    if not nvar:
        return 0

    da = (da0, da1)
    db = (db0, db1)
    Xs = (X0, X1)
    Ys = (Y0, Y1)
    for i in range(2):
        for k in range(2):
            # dq_i/dq_k
            A[i * 4 + k] = (
                da[k] * Xs[i] + a * jet[4 + i * 2 + k] + db[k] * Ys[i] + b * jet[8 + i * 2 + k]
            )
        for j in range(2):
            A[i * 4 + 2 + j] = Xs[j] * Xs[i] + Ys[j] * Ys[i]
    for k in range(2):
        for l in range(2):
            m = k + l
            sx = l0 * jet[12 + 0 * 3 + m] + l1 * jet[12 + 1 * 3 + m]
            sy = l0 * jet[12 + 2 * 3 + m] + l1 * jet[12 + 3 * 3 + m]
            A[(2 + k) * 4 + l] = -(da[l] * da[k] + a * sx + db[l] * db[k] + b * sy)
        for j in range(2):
            A[(2 + k) * 4 + 2 + j] = -(
                Xs[j] * da[k] + a * jet[4 + j * 2 + k] + Ys[j] * db[k] + b * jet[8 + j * 2 + k]
            )
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for k in range(4):
                acc += A[i * 4 + k] * s[4 + k * 4 + j]
            out[4 + i * 4 + j] = acc
    return 0


@njit(cache=True)
def variational_matrix(ops, args, consts, starts, s, stack_size):
    """The 4x4 linearisation of the Hamiltonian field at the state ``s``."""
    jet = np.empty(24)
    stack = np.empty(stack_size)
    A = np.empty(16)
    out = np.empty(20)
    full = np.zeros(20)
    full[:4] = s[:4]
    for i in range(4):
        full[4 + i * 5] = 1.0
    err = hamiltonian_rhs(ops, args, consts, starts, full, 1, out, jet, stack, A)
    return A.reshape(4, 4), out[:4].copy(), err


# ---------------------------------------------------------------------------
# integrator


@njit(cache=True)
def _norm(v, y, ynew, rtol, atol):
    acc = 0.0
    n = v.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        r = v[i] / sc
        acc += r * r
    return math.sqrt(acc / n)


@njit(cache=True)
def _step(ops, args, consts, starts, nvar, y, k, h, ynew, errv, tmp, jet, stack, A):
    dim = y.shape[0]
    for s in range(1, 6):
        for i in range(dim):
            acc = 0.0
            for j in range(s):
                acc += _A[s, j] * k[j, i]
            tmp[i] = y[i] + h * acc
        if hamiltonian_rhs(ops, args, consts, starts, tmp, nvar, k[s], jet, stack, A):
            return 1
    for i in range(dim):
        acc = 0.0
        for j in range(6):
            acc += _B[j] * k[j, i]
        ynew[i] = y[i] + h * acc
    if hamiltonian_rhs(ops, args, consts, starts, ynew, nvar, k[6], jet, stack, A):
        return 1
    for i in range(dim):
        acc = 0.0
        for j in range(7):
            acc += _E[j] * k[j, i]
        errv[i] = h * acc
    return 0


@njit(cache=True)
def _dense(y, k, h, theta, out):
    dim = y.shape[0]
    t2 = theta * theta
    t3 = t2 * theta
    t4 = t3 * theta
    for i in range(dim):
        acc = 0.0
        for j in range(7):
            w = _P[j, 0] * theta + _P[j, 1] * t2 + _P[j, 2] * t3 + _P[j, 3] * t4
            acc += w * k[j, i]
        out[i] = y[i] + h * acc


@njit(cache=True)
def _outside(x, y, lo, hi):
    return x < lo[0] or x > hi[0] or y < lo[1] or y > hi[1]


@njit(cache=True)
def _exit_fraction(y, k, h, lo, hi, tmp):
    # bisection on the dense output for the first boundary crossing in (0, 1]
    a = 0.0
    b = 1.0
    for _ in range(64):
        m = 0.5 * (a + b)
        _dense(y, k, h, m, tmp)
        if _outside(tmp[0], tmp[1], lo, hi):
            b = m
        else:
            a = m
    return b


@njit(cache=True)
def _initial_step(ops, args, consts, starts, nvar, y, f0, tmax, rtol, atol, tmp, f1, jet, stack, A):
    dim = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(dim):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / dim)
    d1 = math.sqrt(d1 / dim)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, tmax)
    for i in range(dim):
        tmp[i] = y[i] + h0 * f0[i]
    if hamiltonian_rhs(ops, args, consts, starts, tmp, nvar, f1, jet, stack, A):
        return h0 * 1e-3
    d2 = 0.0
    for i in range(dim):
        sc = atol + rtol * abs(y[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = math.sqrt(d2 / dim) / h0
    m = max(d1, d2)
    if m <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / m) ** 0.2
    return min(100.0 * h0, h1, tmax)


_EXPO1 = 0.2 - 0.04 * 0.75
_BETA = 0.04
_SAFE = 0.9
_FACC1 = 5.0  # largest shrink 1/0.2
_FACC2 = 0.1  # largest growth 1/10


@njit(cache=True)
def _integrate(
    ops, args, consts, starts, stack_size, y0, nvar, rtol, atol, lo, hi, max_steps,
    t_out, out, rec_t, rec_y, rec_k, tmax,
):
    """Shared driver.

    Output mode writes dense samples at ``t_out`` into ``out``; record mode
    (``rec_t.shape[0] > 0``) stores every accepted step with its stages.
    Returns (status, t_end, n_recorded).
    """
    dim = y0.shape[0]
    jet = np.empty(24)
    stack = np.empty(stack_size)
    A = np.empty(16)
    y = y0.copy()
    ynew = np.empty(dim)
    errv = np.empty(dim)
    tmp = np.empty(dim)
    f1 = np.empty(dim)
    k = np.empty((7, dim))
    record = rec_t.shape[0] > 0
    cap = rec_t.shape[0] - 1
    nrec = 0
    if record:
        rec_t[0] = 0.0
        rec_y[0, :] = y

    T = t_out.shape[0]
    j = 0
    while j < T and t_out[j] <= 0.0:
        out[j, :] = y
        j += 1
    if tmax <= 0.0:
        return OK, 0.0, 0
    if hamiltonian_rhs(ops, args, consts, starts, y, nvar, k[0], jet, stack, A):
        return DOMAIN, 0.0, 0

    t = 0.0
    h = _initial_step(ops, args, consts, starts, nvar, y, k[0], tmax, rtol, atol, tmp, f1, jet, stack, A)
    facold = 1e-4
    reject = False
    nsteps = 0
    while t < tmax:
        if nsteps >= max_steps:
            return MAX_STEPS, t, nrec
        last = False
        if t + 1.01 * h >= tmax:
            h = tmax - t
            last = True
        if h <= 1e-14 * max(1.0, abs(t)):
            return UNDERFLOW, t, nrec
        nsteps += 1
        if _step(ops, args, consts, starts, nvar, y, k, h, ynew, errv, tmp, jet, stack, A):
            h *= 0.25
            reject = True
            continue
        err = _norm(errv, y, ynew, rtol, atol)
        fac11 = err**_EXPO1
        if err <= 1.0:
            exited = _outside(ynew[0], ynew[1], lo, hi)
            frac = 1.0
            if exited:
                frac = _exit_fraction(y, k, h, lo, hi, tmp)
            t_stop = t + frac * h
            while j < T and t_out[j] <= t_stop:
                if last and not exited and t_out[j] >= tmax:
                    out[j, :] = ynew
                else:
                    _dense(y, k, h, (t_out[j] - t) / h, out[j])
                j += 1
            if record:
                if nrec >= cap:
                    return BUFFER_FULL, t, nrec
                rec_k[nrec, :, :] = k
                nrec += 1
                rec_t[nrec] = t + h
                rec_y[nrec, :] = ynew
            if exited:
                return CHART_EXIT, t_stop, nrec
            fac = fac11 / facold**_BETA
            fac = max(_FACC2, min(_FACC1, fac / _SAFE))
            hnew = h / fac
            if reject:
                hnew = min(hnew, h)
            facold = max(err, 1e-4)
            t = tmax if last else t + h
            y[:] = ynew
            k[0, :] = k[6]
            h = hnew
            reject = False
        else:
            h = h / min(_FACC1, fac11 / _SAFE)
            reject = True
    return OK, t, nrec


@njit(cache=True, parallel=True)
def integrate_batch(ops, args, consts, starts, stack_size, y0, t_out, nvar, rtol, atol, lo, hi, max_steps):
    """Integrate many trajectories from t=0, sampling each at the sorted times ``t_out``.

    Returns ``(out, status, t_end)``; samples past a failure are NaN.
    """
    n, dim = y0.shape
    T = t_out.shape[0]
    out = np.full((n, T, dim), np.nan)
    status = np.zeros(n, dtype=np.int64)
    t_end = np.zeros(n)
    tmax = t_out[T - 1] if T > 0 else 0.0
    rec_t = np.empty(0)
    rec_y = np.empty((0, dim))
    rec_k = np.empty((0, 7, dim))
    for i in prange(n):
        st, te, _ = _integrate(
            ops, args, consts, starts, stack_size, y0[i], nvar, rtol, atol, lo, hi,
            max_steps, t_out, out[i], rec_t, rec_y, rec_k, tmax,
        )
        status[i] = st
        t_end[i] = te
    return out, status, t_end


@njit(cache=True)
def integrate_record(ops, args, consts, starts, stack_size, y0, tmax, nvar, rtol, atol, lo, hi, max_steps, cap):
    """Integrate one trajectory keeping the full adaptive mesh and its stages."""
    dim = y0.shape[0]
    rec_t = np.empty(cap + 1)
    rec_y = np.empty((cap + 1, dim))
    rec_k = np.empty((cap, 7, dim))
    t_out = np.empty(0)
    out = np.empty((0, dim))
    st, te, n = _integrate(
        ops, args, consts, starts, stack_size, y0, nvar, rtol, atol, lo, hi,
        max_steps, t_out, out, rec_t, rec_y, rec_k, tmax,
    )
    return rec_t[: n + 1].copy(), rec_y[: n + 1].copy(), rec_k[:n].copy(), st, te
