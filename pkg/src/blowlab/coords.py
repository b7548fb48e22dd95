"""Radial height functions and graphical similarity coordinates.

A chart centered at (T, 0) maps (tau, rho) to the physical event
t = T + T e^{-tau} h(rho), r = T e^{-tau} rho.  Every height profile here
is even, convex, has h(0) < 0 and slope below one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, DomainError

STANDARD = "standard"
HYPERBOLOIDAL = "hyperboloidal"
FLATTENED_CONE = "flattened_cone"
KINDS = (STANDARD, HYPERBOLOIDAL, FLATTENED_CONE)

BISECT_WIDTH = 1e-8
NEWTON_RTOL = 1e-13


def _bump_scalar(y: float) -> float:
    if abs(y) >= 1.0:
        return 0.0
    return math.exp(-1.0 / (1.0 - y * y))


_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-13, limit=200)


@dataclass(frozen=True)
class HeightFunction:
    """Radial height profile of a similarity chart.

    Use the constructors ``standard``, ``hyperboloidal`` and ``flattened_cone``.
    """

    kind: str
    params: tuple = ()
    _norm: float = field(default=1.0, repr=False, compare=False)

    @classmethod
    def standard(cls) -> "HeightFunction":
        return cls(STANDARD, ())

    @classmethod
    def hyperboloidal(cls, alpha: float, beta: float) -> "HeightFunction":
        if not (alpha > 0 and beta > 0):
            raise ConfigurationError("hyperboloidal height needs alpha > 0 and beta > 0")
        return cls(HYPERBOLOIDAL, (float(alpha), float(beta)))

    @classmethod
    def flattened_cone(cls, kappa_bar: float, r_bar: float, eps: float) -> "HeightFunction":
        if not (0.0 < kappa_bar < 1.0):
            raise ConfigurationError("flattened cone needs 0 < kappa_bar < 1")
        if not (0.0 < eps < r_bar):
            raise ConfigurationError("flattened cone needs 0 < eps < r_bar")
        norm = quad(_bump_scalar, -1.0, 1.0, **_QUAD_OPTS)[0]
        return cls(FLATTENED_CONE, (float(kappa_bar), float(r_bar), float(eps)), norm)

    @classmethod
    def from_spec(cls, kind: str, params=()) -> "HeightFunction":
        kind = kind.lower().replace("-", "_")
        if kind == STANDARD:
            return cls.standard()
        if kind == HYPERBOLOIDAL:
            return cls.hyperboloidal(*(params or (1.0, 1.0)))
        if kind in (FLATTENED_CONE, "flattenedcone", "cone"):
            return cls.flattened_cone(*(params or (0.5, 1.0, 0.25)))
        raise ConfigurationError(f"unknown height kind {kind!r}")

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown height kind {self.kind!r}")

    def describe(self) -> dict:
        names = {
            STANDARD: (),
            HYPERBOLOIDAL: ("alpha", "beta"),
            FLATTENED_CONE: ("kappa_bar", "r_bar", "eps"),
        }[self.kind]
        return {"kind": self.kind, **dict(zip(names, self.params))}

    @property
    def plateau_radius(self) -> float:
        """Radius up to which h is identically -1 (0 if there is no plateau)."""
        if self.kind == STANDARD:
            return math.inf
        if self.kind == HYPERBOLOIDAL:
            return 0.0
        _, r_bar, eps = self.params
        return r_bar - eps

    @property
    def asymptotic_slope(self) -> float:
        if self.kind == STANDARD:
            return 0.0
        if self.kind == HYPERBOLOIDAL:
            return 1.0
        return self.params[0]

    @property
    def is_polynomial(self) -> bool:
        return self.kind == STANDARD

    def __call__(self, rho):
        """Return (h, h', h'') at rho (scalar or array)."""
        scalar = np.ndim(rho) == 0
        rho = np.atleast_1d(_real_array(rho))
        if np.any(rho < 0):
            raise DomainError("height functions are evaluated at rho >= 0")
        if self.kind == STANDARD:
            out = (-np.ones_like(rho), np.zeros_like(rho), np.zeros_like(rho))
        elif self.kind == HYPERBOLOIDAL:
            a, b = self.params
            root = np.sqrt(1.0 + (rho / a) ** 2)
            out = (a * root - a - b, (rho / a) / root, 1.0 / (a * root**3))
        else:
            out = self._cone(rho)
        if scalar:
            return tuple(float(v[0]) for v in out)
        return out

    def slope_over_rho(self, rho):
        """h'(rho)/rho with its even limit h''(0) at the origin."""
        rho = _real_array(rho)
        if self.kind == STANDARD:
            return np.zeros_like(rho)
        if np.ndim(rho) == 0:
            return float(self.slope_over_rho(rho[None])[0])
        if self.kind == HYPERBOLOIDAL:
            a, _ = self.params
            return 1.0 / (a * np.sqrt(1.0 + (rho / a) ** 2))
        _, h1, _ = self._cone(rho)
        out = np.zeros_like(rho)
        pos = rho > 0
        out[pos] = h1[pos] / rho[pos]
        return out

    def _cone(self, rho):
        kb, rb, eps = self.params
        h = np.full_like(rho, -1.0)
        h1 = np.zeros_like(rho)
        h2 = np.zeros_like(rho)
        cone = rho >= rb + eps
        h[cone] = kb * (rho[cone] - rb) - 1.0
        h1[cone] = kb
        band = np.flatnonzero((rho > rb - eps) & ~cone)
        for i in band:
            x = (rho[i] - rb) / eps
            m0 = quad(_bump_scalar, -1.0, x, **_QUAD_OPTS)[0] / self._norm
            m1 = quad(lambda y: y * _bump_scalar(y), -1.0, x, **_QUAD_OPTS)[0] / self._norm
            h[i] = kb * eps * (x * m0 - m1) - 1.0
            h1[i] = kb * m0
            h2[i] = kb * _bump_scalar(x) / (eps * self._norm)
        return h, h1, h2


def _real_array(x):
    """Float array keeping extended precision when given."""
    x = np.asarray(x)
    return x.astype(np.result_type(x.dtype, np.float64), copy=False)


def height_eval(h: HeightFunction, rho):
    """Return (h, h', h'', c, w) with c = rho h' - h and w = 1 - h'^2."""
    if np.any(np.asarray(rho) < 0):
        raise DomainError("height_eval needs rho >= 0")
    h0, h1, h2 = h(rho)
    c = rho * h1 - h0
    w = 1.0 - h1 * h1
    if np.ndim(rho) == 0:
        return float(h0), float(h1), float(h2), float(c), float(w)
    return h0, h1, h2, c, w


def _monotone_root(fn, dfn, lo, hi, increasing):
    """Root of a strictly monotone function bracketed by [lo, hi]."""
    sign = 1.0 if increasing else -1.0
    while hi - lo > BISECT_WIDTH * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if sign * fn(mid) > 0:
            hi = mid
        else:
            lo = mid
    x = 0.5 * (lo + hi)
    for _ in range(50):
        step = fn(x) / dfn(x)
        x_new = x - step
        if not (lo - BISECT_WIDTH <= x_new <= hi + BISECT_WIDTH):
            break
        x = x_new
        if abs(step) <= NEWTON_RTOL * max(abs(x), 1e-300):
            break
    return x


def light_cone_radius(h: HeightFunction, rho_max: float = 10.0) -> float:
    """Unique root of h(rho) + rho, where the slice meets the backward cone."""
    def g(r):
        return h(r)[0] + r

    def dg(r):
        return h(r)[1] + 1.0

    if g(rho_max) <= 0:
        raise ConfigurationError(f"light-cone root not bracketed in [0, {rho_max}]")
    return _monotone_root(g, dg, 0.0, rho_max, increasing=True)


def image_slopes(h: HeightFunction, R: float):
    """(kappa, kappa_R): asymptotic slope of h and h(R)/R."""
    if R <= 0:
        raise DomainError("image_slopes needs R > 0")
    return h.asymptotic_slope, h(R)[0] / R


@dataclass
class ValidationReport:
    checks: dict
    R_h4: float | None
    kappa: float

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"checks": dict(self.checks), "R_h4": self.R_h4, "kappa": self.kappa, "passed": self.passed}


def validate_height(h: HeightFunction, samples: int = 1000, kappa: float = 0.0,
                    rho_max: float | None = None) -> ValidationReport:
    """Sampled check of the height conditions, including the flattened-cone flags.

    (h4) is solved for h(R) = kappa R with R at or beyond the plateau edge.
    """
    if samples < 2:
        raise ConfigurationError("validate_height needs samples >= 2")
    plateau = h.plateau_radius
    finite_plateau = plateau if math.isfinite(plateau) else 0.0
    if rho_max is None:
        extent = finite_plateau
        if h.kind == FLATTENED_CONE:
            extent = h.params[1] + h.params[2]
        rho_max = 10.0 * max(1.0, extent)
    rho = np.linspace(0.0, rho_max, samples)
    h0, h1, h2 = h(rho)
    checks = {
        "h0_negative": bool(h0[0] < 0),
        "even_at_origin": bool(abs(h1[0]) == 0.0),
        "slope_range": bool(np.all((h1 >= 0) & (h1 < 1))),
        "convexity": bool(np.all(h2 >= -1e-14)),
    }
    if plateau > 0:
        on = rho <= plateau
        checks["h1_plateau"] = bool(np.all(h0[on] == -1.0))
    else:
        checks["h1_plateau"] = False
    checks["h2_gradient"] = bool(np.all(np.abs(h1) < 1))
    checks["h3_convexity"] = checks["convexity"]

    R = _solve_h4(h, kappa, finite_plateau, rho_max)
    checks["h4_slope"] = R is not None
    return ValidationReport(checks, R, kappa)


def _solve_h4(h, kappa, start, rho_max):
    # h(rho)/rho increases strictly on (0, inf) with derivative c/rho^2
    def q(r):
        return h(r)[0] / r - kappa

    def dq(r):
        h0, h1, _ = h(r)
        return (r * h1 - h0) / (r * r)

    lo = max(start, 1e-12)
    if q(lo) > 0:
        return None
    hi = max(2.0 * lo, 1.0)
    while q(hi) <= 0:
        hi *= 2.0
        if hi > 1e3 * rho_max:
            return None
    return _monotone_root(q, dq, lo, hi, increasing=True)


@dataclass(frozen=True)
class Event:
    t: float
    r: float

    def __post_init__(self):
        if self.r < 0:
            raise DomainError("events need r >= 0")


@dataclass(frozen=True)
class CoordChart:
    """Similarity chart of radius R centered at (T, 0)."""

    height: HeightFunction
    T: float = 1.0
    R: float | None = None

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigurationError("chart needs T > 0")
        r0 = light_cone_radius(self.height)
        if self.R is None:
            object.__setattr__(self, "R", r0)
        elif self.R < r0 * (1 - 1e-13):
            raise ConfigurationError(f"chart radius {self.R} is inside the light cone radius {r0}")

    @cached_property
    def light_cone(self) -> float:
        return light_cone_radius(self.height)


def to_physical(chart: CoordChart, tau, rho):
    if np.any(np.asarray(rho) > chart.R * (1 + 1e-14)) or np.any(np.asarray(rho) < 0):
        raise DomainError(f"rho must lie in [0, R={chart.R}]")
    scale = chart.T * np.exp(-np.asarray(tau, dtype=float))
    t = chart.T + scale * chart.height(rho)[0]
    r = scale * rho
    if np.ndim(t) == 0:
        return Event(float(t), float(r))
    return t, r


def _scale_root(h: HeightFunction, radius: float, target: float) -> float:
    """Solve alpha h(radius/alpha) = target for alpha > 0 (decreasing in alpha)."""
    if radius == 0.0:
        alpha = target / h(0.0)[0]
        if alpha <= 0:
            raise DomainError("no positive scale at the origin")
        return alpha

    def F(a):
        return a * h(radius / a)[0] - target

    def dF(a):
        h0, h1, _ = h(radius / a)
        return h0 - (radius / a) * h1

    lo, hi = 1.0, 1.0
    for _ in range(2000):
        if F(lo) > 0:
            break
        lo *= 0.5
    else:
        raise DomainError("scale root not bracketed from below")
    for _ in range(2000):
        if F(hi) < 0:
            break
        hi *= 2.0
    else:
        raise DomainError("scale root not bracketed from above")
    return _monotone_root(F, dF, lo, hi, increasing=False)


def from_physical(chart: CoordChart, e: Event):
    """Inverse chart map; returns (tau, rho) with tau >= 0 and rho <= R."""
    T, h = chart.T, chart.height
    if not (e.t - T < h.asymptotic_slope * e.r):
        raise DomainError("event violates t < T + kappa |x| (outside the chart image)")
    alpha = _scale_root(h, e.r / T, (e.t - T) / T)
    tau = -math.log(alpha)
    rho = e.r / (T * alpha)
    if tau < -1e-14:
        raise DomainError("event violates t >= T + T h(x/T) (before the initial slice)")
    if rho > chart.R * (1 + 1e-12):
        raise DomainError(f"event violates |x| <= R T e^(-tau) (rho={rho} > R={chart.R})")
    return (tau if tau > 0 else 0.0), rho


def transition_scale(h: HeightFunction, hbar: HeightFunction, rho_bar: float) -> float:
    """Scale factor h_+ relating the chart of hbar to the chart of h at rho_bar."""
    if rho_bar < 0:
        raise DomainError("transition_scale needs rho_bar >= 0")
    if h == hbar:
        return 1.0
    return _scale_root(h, float(rho_bar), hbar(float(rho_bar))[0])


def foliation_metrics(h: HeightFunction, rho, d: int, tau: float = 0.0, T: float = 1.0):
    """(det gamma, n^0, n^r) of the constant-tau slice."""
    _, h1, _, _, w = height_eval(h, rho)
    det = (T * math.exp(-tau)) ** (2 * d) * w
    root = np.sqrt(w)
    return det, 1.0 / root, h1 / root
