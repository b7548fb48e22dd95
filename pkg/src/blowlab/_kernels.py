"""RK4 time stepping kernels.

The numba versions are used unless BLOWLAB_DISABLE_NUMBA=1 is set or numba
is unavailable; the numpy versions compute the same quantities.
"""

from __future__ import annotations

import math
import os

import numpy as np

WM_CODE = 0
YM_CODE = 1

STATUS_OK = 0
STATUS_DIVERGED = 1


def _numba_wanted() -> bool:
    return os.environ.get("BLOWLAB_DISABLE_NUMBA", "").strip().lower() not in ("1", "true", "yes")


try:
    if not _numba_wanted():
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with the env flag
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# Taylor coefficients of (sin b - b)/b^3 in powers of b^2
_SIN_REM_COEFFS = np.array([(-1.0) ** k / math.factorial(2 * k + 1) for k in range(1, 10)])


def _sin_rem_scalar(b):
    # (sin b - b)/b^3
    if abs(b) < 0.5:
        b2 = b * b
        acc = 0.0
        for k in range(_SIN_REM_COEFFS.shape[0] - 1, -1, -1):
            acc = acc * b2 + _SIN_REM_COEFFS[k]
        return acc
    return (math.sin(b) - b) / (b * b * b)


def _sinc_scalar(x):
    if x == 0.0:
        return 1.0
    return math.sin(x) / x


_sin_rem_nb = njit(cache=True)(_sin_rem_scalar)
_sinc_nb = njit(cache=True)(_sinc_scalar)


@njit(cache=True)
def _remainder_nb(kind, d, r, psi, z):
    if kind == 1:
        return (d - 4) * (3 * z * z - r * r * (3 * psi * z * z + z * z * z))
    a2 = 2 * r * psi
    t = z * _sinc_nb(r * z)
    first = -2.0 * (2 * psi * _sinc_nb(a2)) * t * t
    second = math.cos(a2) * 8.0 * z * z * z * _sin_rem_nb(2 * r * z)
    return -(d - 3) / 2.0 * (first + second)


@njit(cache=True)
def _rhs_nb(A, u, out, n, rho, psi, cw, d, kind, nonlinear):
    m = u.shape[0]
    for i in range(m):
        acc = 0.0
        for j in range(m):
            acc += A[i, j] * u[j]
        out[i] = acc
    if nonlinear:
        for i in range(n):
            out[n + i] += cw[i] * _remainder_nb(kind, d, rho[i], psi[i], u[i])


@njit(cache=True)
def _run_nb(A, u0, dt, nsteps, stride, rho, psi, cw, d, kind, nonlinear, guard):
    m = u0.shape[0]
    n = m // 2
    nsamp = nsteps // stride + 1
    out = np.zeros((nsamp, m))
    u = u0.copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    out[0] = u
    for step in range(1, nsteps + 1):
        _rhs_nb(A, u, k1, n, rho, psi, cw, d, kind, nonlinear)
        for i in range(m):
            tmp[i] = u[i] + 0.5 * dt * k1[i]
        _rhs_nb(A, tmp, k2, n, rho, psi, cw, d, kind, nonlinear)
        for i in range(m):
            tmp[i] = u[i] + 0.5 * dt * k2[i]
        _rhs_nb(A, tmp, k3, n, rho, psi, cw, d, kind, nonlinear)
        for i in range(m):
            tmp[i] = u[i] + dt * k3[i]
        _rhs_nb(A, tmp, k4, n, rho, psi, cw, d, kind, nonlinear)
        big = 0.0
        for i in range(m):
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            a = abs(u[i])
            if not (a <= big):
                big = a
        if not (big <= guard):
            return out, step, 1
        if step % stride == 0:
            out[step // stride] = u
    return out, nsteps, 0


def _remainder_np(kind, d, rho, psi, z):
    from .models import Model, nonlinear_remainder_values

    m = Model("wm" if kind == WM_CODE else "ym", d)
    return nonlinear_remainder_values(m, rho, psi, z)


def _run_np(A, u0, dt, nsteps, stride, rho, psi, cw, d, kind, nonlinear, guard):
    m = u0.shape[0]
    n = m // 2

    def rhs(u):
        out = A @ u
        if nonlinear:
            out[n:] += cw * _remainder_np(kind, d, rho, psi, u[:n])
        return out

    nsamp = nsteps // stride + 1
    out = np.zeros((nsamp, m))
    u = u0.copy()
    out[0] = u
    for step in range(1, nsteps + 1):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        big = np.max(np.abs(u))
        if not big <= guard:
            return out, step, STATUS_DIVERGED
        if step % stride == 0:
            out[step // stride] = u
    return out, nsteps, STATUS_OK


def remainder(kind: int, d: int, rho, psi, z, use_numba: bool | None = None) -> np.ndarray:
    """Pointwise nonlinear remainder through the selected backend."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if not use_numba:
        return _remainder_np(kind, d, rho, psi, z)
    return np.array([_remainder_nb(kind, d, float(r), float(p), float(x))
                     for r, p, x in zip(rho, psi, z)])


def rk4_run(A, u0, dt, nsteps, stride, rho, psi, cw, d, kind, nonlinear, guard=1e6,
            use_numba: bool | None = None):
    """Run nsteps RK4 steps; return (samples, steps taken, status)."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    args = (np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(u0, dtype=float), float(dt),
            int(nsteps), int(stride), np.ascontiguousarray(rho, dtype=float),
            np.ascontiguousarray(psi, dtype=float), np.ascontiguousarray(cw, dtype=float),
            int(d), int(kind), bool(nonlinear), float(guard))
    if use_numba and HAVE_NUMBA:
        return _run_nb(*args)
    return _run_np(*args)
