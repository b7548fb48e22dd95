"""Corotational wave maps and equivariant Yang-Mills in reduced radial form.

Both models are written as -psi_tt + Delta_d psi + F(r, psi) = 0 on R^{1,d},
with the explicit self-similar profile psi*(t, r) blowing up at t = 0.
The reduced dimension d equals the physical dimension plus two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coords import HeightFunction, _real_array, height_eval
from .errors import ConfigurationError, DomainError, SingularityError

WAVE_MAPS = "wm"
YANG_MILLS = "ym"

TAYLOR_SWITCH = 1e-2
SERIES_SWITCH = 0.1


def ym_coefficients(n: int):
    """(alpha_n, beta_n) of the Yang-Mills profile 1/(alpha t^2 + beta r^2)."""
    if n < 5:
        raise DomainError("ym_coefficients needs n >= 5")
    root = math.sqrt(3 * (n - 2) * (n - 4))
    alpha = (3 * (n - 2) * (n - 4) + (n + 2) * root) / (12 * (n - 1))
    beta = (3 * (n - 2) - root) / (4 * (n - 1))
    return alpha, beta


@dataclass(frozen=True)
class Model:
    kind: str
    d: int

    def __post_init__(self):
        kind = self.kind.lower()
        if kind in ("wavemaps", "wave_maps", "wave-maps"):
            kind = WAVE_MAPS
        if kind in ("yangmills", "yang_mills", "yang-mills"):
            kind = YANG_MILLS
        object.__setattr__(self, "kind", kind)
        if kind == WAVE_MAPS:
            if self.d < 5:
                raise ConfigurationError("wave maps need d >= 5")
        elif kind == YANG_MILLS:
            if self.d < 7:
                raise ConfigurationError("Yang-Mills needs d >= 7")
        else:
            raise ConfigurationError(f"unknown model {self.kind!r}")

    @property
    def s(self) -> int:
        return 1 if self.kind == WAVE_MAPS else 2

    @property
    def a(self) -> float:
        return math.sqrt(self.d - 4)

    @property
    def k_min(self) -> int:
        """Smallest energy order admitted by the nonlinear theory."""
        if self.kind == WAVE_MAPS:
            return math.ceil(self.d / 2)
        return math.ceil((self.d - 1) / 2)

    @property
    def coefficients(self):
        if self.kind != YANG_MILLS:
            raise ConfigurationError("only Yang-Mills carries (alpha, beta)")
        return ym_coefficients(self.d - 2)

    def describe(self) -> dict:
        out = {"model": self.kind, "d": self.d, "s": self.s}
        if self.kind == YANG_MILLS:
            out["alpha"], out["beta"] = self.coefficients
        return out


@dataclass(frozen=True)
class ProfileEval:
    psi: float
    psi_t: float
    psi_r: float


def _arctan_ratio(q):
    """arctan(q)/q and its derivative for |q| < SERIES_SWITCH."""
    q2 = q * q
    g = np.zeros_like(q)
    dg = np.zeros_like(q)
    for k in range(9, -1, -1):
        g = g * q2 + (-1) ** k / (2 * k + 1)
    for k in range(9, 0, -1):
        dg = dg * q2 + (-1) ** k * 2 * k / (2 * k + 1)
    return g, dg * q


def profile_derivatives(m: Model, t, r):
    """Return (psi, psi_t, psi_r, psi_tt, psi_tr) of psi*(t, r), vectorized."""
    shape = np.broadcast(t, r).shape
    t, r = np.broadcast_arrays(np.atleast_1d(_real_array(t)), np.atleast_1d(_real_array(r)))
    if np.any((t == 0) & (r == 0)):
        raise SingularityError("the blowup profile is singular at (t, r) = (0, 0)")
    if np.any(r < 0):
        raise DomainError("profile needs r >= 0")
    if m.kind == WAVE_MAPS:
        a = m.a
        at = a * t
        S = at * at + r * r
        theta = np.arctan2(r, at)
        with np.errstate(divide="ignore", invalid="ignore"):
            psi = 2.0 * theta / r
            psi_r = (2.0 / r) * (at / S - theta / r)
            q = r / at
        small = (at > 0) & (np.abs(q) < SERIES_SWITCH)
        if np.any(small):
            g, dg = _arctan_ratio(q[small])
            psi[small] = 2.0 / at[small] * g
            psi_r[small] = 2.0 * dg / (at[small] ** 2)
        psi_t = -2.0 * a / S
        psi_tt = 4.0 * a**3 * t / S**2
        psi_tr = 4.0 * a * r / S**2
    else:
        al, be = m.coefficients
        P = al * t * t + be * r * r
        psi = 1.0 / P
        psi_t = -2.0 * al * t / P**2
        psi_r = -2.0 * be * r / P**2
        psi_tt = -2.0 * al / P**2 + 8.0 * al * al * t * t / P**3
        psi_tr = 8.0 * al * be * t * r / P**3
    return tuple(v.reshape(shape) for v in (psi, psi_t, psi_r, psi_tt, psi_tr))


def blowup_profile(m: Model, t: float, r: float) -> ProfileEval:
    psi, pt, pr, _, _ = profile_derivatives(m, t, r)
    return ProfileEval(float(psi), float(pt), float(pr))


def _sinc(x):
    """sin(x)/x in the working precision of x."""
    x = _real_array(x)
    safe = np.where(x == 0, 1, x)
    return np.where(x == 0, 1, np.sin(safe) / safe)


def nonlinearity(m: Model, r, z):
    """(F, dF/dz, d2F/dz2) of the reduced nonlinearity."""
    shape = np.broadcast(r, z).shape
    r, z = np.broadcast_arrays(np.atleast_1d(_real_array(r)), np.atleast_1d(_real_array(z)))
    d = m.d
    if m.kind == YANG_MILLS:
        F = (d - 4) * (3 * z * z - r * r * z**3)
        F1 = (d - 4) * (6 * z - 3 * r * r * z * z)
        F2 = (d - 4) * (6 - 6 * r * r * z)
        return F.reshape(shape), F1.reshape(shape), F2.reshape(shape)
    rz = r * z
    small = np.abs(rz) < TAYLOR_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        F = -(d - 3) / 2.0 * (np.sin(2 * rz) - 2 * rz) / r**3
    if np.any(small):
        rs, zs = r[small], z[small]
        r2 = rs * rs
        z2 = zs * zs
        F[small] = (d - 3) * zs**3 * (
            2.0 / 3.0 - z2 * r2 * (2.0 / 15.0 - z2 * r2 * (4.0 / 315.0 - z2 * r2 * 2.0 / 2835.0))
        )
    F1 = 2.0 * (d - 3) * z * z * _sinc(rz) ** 2
    F2 = 4.0 * (d - 3) * z * _sinc(2 * rz)
    return F.reshape(shape), F1.reshape(shape), F2.reshape(shape)


def _sin_remainder(b):
    """(sin b - b)/b^3 without cancellation."""
    shape = np.shape(b)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    out = np.empty_like(b)
    small = np.abs(b) < 0.5
    bs2 = b[small] ** 2
    acc = np.zeros_like(bs2)
    for k in range(9, 0, -1):
        acc = acc * bs2 + (-1) ** k / math.factorial(2 * k + 1)
    out[small] = acc
    big = ~small
    out[big] = (np.sin(b[big]) - b[big]) / b[big] ** 3
    return out.reshape(shape)


def nonlinear_remainder_values(m: Model, r, psi, z):
    """F(r, psi+z) - F(r, psi) - F'(r, psi) z, evaluated without cancellation."""
    r = np.asarray(r, dtype=float)
    psi = np.asarray(psi, dtype=float)
    z = np.asarray(z, dtype=float)
    d = m.d
    if m.kind == YANG_MILLS:
        return (d - 4) * (3 * z * z - r * r * (3 * psi * z * z + z**3))
    # sin(a+b) - sin a - b cos a = -2 sin a sin^2(b/2) + cos a (sin b - b)
    a2 = 2 * r * psi
    first = -2.0 * (2 * psi * _sinc(a2)) * (z * _sinc(r * z)) ** 2
    second = np.cos(a2) * 8.0 * z**3 * _sin_remainder(2 * r * z)
    return -(d - 3) / 2.0 * (first + second)


def _slice_profile(m: Model, h: HeightFunction, rho):
    h0, h1, _ = h(rho)
    return h1, profile_derivatives(m, -h0, rho)


def potential(m: Model, h: HeightFunction, rho):
    """V(rho) = F'(rho, psi*(-h(rho), rho))."""
    _, (psi, *_rest) = _slice_profile(m, h, rho)
    V = nonlinearity(m, rho, psi)[1]
    return float(V) if np.ndim(rho) == 0 else V


def potential_explicit(m: Model, h: HeightFunction, rho):
    """Closed-form potential along the slice t = -h(rho)."""
    t = -np.asarray(h(rho)[0], dtype=float)
    r = np.asarray(rho, dtype=float)
    d = m.d
    if m.kind == WAVE_MAPS:
        V = 8.0 * (d - 3) * (d - 4) * t * t / ((d - 4) * t * t + r * r) ** 2
    else:
        al, be = m.coefficients
        V = 3.0 * (d - 4) * (2 * al * t * t + (2 * be - 1) * r * r) / (al * t * t + be * r * r) ** 2
    return float(V) if np.ndim(rho) == 0 else V


def nonlinear_remainder(m: Model, h: HeightFunction, rho, z):
    """N(z) = F(rho, psi*+z) - F'(rho, psi*) z - F(rho, psi*) along the slice."""
    _, (psi, *_rest) = _slice_profile(m, h, rho)
    out = nonlinear_remainder_values(m, rho, psi, z)
    return float(out) if np.ndim(out) == 0 else out


def profile_on_slice(m: Model, h: HeightFunction, rho):
    """State (psi*(-h, rho), -psi*_t(-h, rho)) of the blowup solution in a chart."""
    _, (psi, psi_t, *_rest) = _slice_profile(m, h, rho)
    return psi, -psi_t


def symmetry_mode(m: Model, h: HeightFunction, rho):
    """(f1*, second component) of the eigenvalue-one mode."""
    h0, h1, _, c, _ = height_eval(h, rho)
    _, psi_t, _, psi_tt, psi_tr = profile_derivatives(m, -np.asarray(h0), rho)
    f1 = psi_t
    df1 = -h1 * psi_tt + psi_tr
    second = ((m.s + 1) * f1 + rho * df1) / c
    if np.ndim(rho) == 0:
        return float(f1), float(second)
    return f1, second


def reconstruct_map(m: Model, psi: float, x, wrap_guard: float = math.pi):
    """Geometric field from the radial profile value psi at the point x.

    Wave maps return the sphere-valued point in R^{n+1}; Yang-Mills returns
    the array A[mu, i, j] with mu = 0 the (vanishing) time component.
    """
    x = np.asarray(x, dtype=float)
    rad = float(np.linalg.norm(x))
    if m.kind == WAVE_MAPS:
        if abs(rad * psi) > wrap_guard:
            raise DomainError(f"|x| psi = {rad * psi} exceeds the wrap guard {wrap_guard}")
        ang = rad * psi
        out = np.empty(x.size + 1)
        out[:-1] = psi * _sinc(ang) * x
        out[-1] = math.cos(ang)
        return out
    n = x.size
    eye = np.eye(n)
    A = np.zeros((n + 1, n, n))
    # A[mu, i, j] = psi (x_i delta_{mu j} - x_j delta_{mu i})
    A[1:] = psi * (x[None, :, None] * eye[:, None, :] - x[None, None, :] * eye[:, :, None])
    return A
