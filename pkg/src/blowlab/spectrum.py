"""Eigenvalue problem of the linearized generator.

Covers the radial mode ODE, its hypergeometric reduction in standard
self-similar coordinates, dense spectra with resolution-matched trust
filtering, the symmetry eigenpair and the rank-one spectral projector.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .coords import HeightFunction, height_eval, light_cone_radius, transition_scale
from .discretize import RadialGrid, build_grid, energy_form, energy_gram
from .errors import AccuracyError, CheckFailure, ConfigurationError, DomainError
from .linops import assemble_L
from .models import Model, potential, potential_explicit, symmetry_mode

DELTA_GAP = 0.2
MATCH_TOL = 1e-4


class SingularPointWarning(UserWarning):
    """Mode coefficients evaluated on a regular singular point."""


def mode_ode_coeffs(h: HeightFunction, d: int, lam: complex, s: int, rho):
    """(a2, a1, a0) of the radial mode equation with the shift lam -> lam + s.

    The mode equation reads a2 f'' + a1 f' + (a0 + V) f = 0.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("mode coefficients need rho > 0")
    mu = lam + s
    h0, h1, h2, c, w = height_eval(h, rho)
    a2 = -(rho * rho - h0 * h0) / c**2
    a1 = (2 * ((d - 3) / 2.0 - mu) * (rho - h0 * h1) / c**2
          + ((d - 1) / rho - rho * h2 / c) * a2)
    a0 = -mu * (mu + 1) * w / c**2 - mu * (d - 1) / c * h1 / rho - mu * h2 / c * a2
    if np.any(np.abs(a2) < 1e-13):
        warnings.warn("rho lies on the light-cone singular point a2 = 0", SingularPointWarning,
                      stacklevel=2)
    return a2, a1, a0


def mode_ode_residual(g: RadialGrid, m: Model, h: HeightFunction, lam: complex, f) -> np.ndarray:
    """a2 f'' + a1 f' + (a0 + V) f at the nodes rho > 0."""
    f = np.asarray(f)
    rho = g.rho[1:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularPointWarning)
        a2, a1, a0 = mode_ode_coeffs(h, m.d, lam, m.s, rho)
    V = potential(m, h, rho)
    return a2 * (g.D2e @ f)[1:] + a1 * (g.D1e @ f)[1:] + (a0 + V) * f[1:]


@dataclass(frozen=True)
class HypergeometricForm:
    a: complex
    b: complex
    c: float
    model: Model

    def W(self, z):
        """Potential with W(rho^2) equal to the standard-chart potential at rho."""
        z = np.asarray(z, dtype=float)
        if np.any(z < 0):
            raise DomainError("W needs z >= 0")
        return potential_explicit(self.model, HeightFunction.standard(), np.sqrt(z))

    def __iter__(self):
        return iter((self.a, self.b, self.c, self.W))


def hypergeometric_form(m: Model, lam: complex) -> HypergeometricForm:
    mu = lam + m.s
    return HypergeometricForm(mu / 2, (mu + 1) / 2, m.d / 2, m)


@dataclass(frozen=True)
class FrobeniusIndices:
    at_zero: tuple
    at_one: tuple
    resonant_zero: bool
    resonant_one: bool
    logarithmic_one: bool


def _is_integer(x, tol=1e-12) -> bool:
    x = complex(x)
    return abs(x.imag) < tol and abs(x.real - round(x.real)) < tol


def frobenius_indices(m: Model, lam: complex) -> FrobeniusIndices:
    """Indices of the hypergeometric form at z = 0 and z = 1."""
    zero = (0.0, -(m.d - 2) / 2.0)
    e1 = m.d / 2.0 - m.s - 0.5 - lam
    one = (0.0, e1)
    # integer index differences allow logarithmic solutions
    res0 = _is_integer(zero[0] - zero[1])
    res1 = _is_integer(e1)
    return FrobeniusIndices(zero, one, res0, res1, res1)


@dataclass(eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    trusted: np.ndarray
    lambda_sym: complex
    omega_gap: float
    simple: bool
    f1: np.ndarray
    g1: np.ndarray
    projector_defect: float
    eigen_defect: float
    biorthogonality: float
    N: int
    N_check: int
    delta_gap: float = DELTA_GAP
    meta: dict = field(default_factory=dict)

    def projection(self, u) -> complex:
        """<g1, u> with <g1, f1> = 1."""
        return complex(np.vdot(self.g1, np.asarray(u)))

    def project(self, u) -> np.ndarray:
        return self.projection(u) * self.f1

    def projector(self) -> np.ndarray:
        return np.outer(self.f1, self.g1.conj())

    @property
    def trusted_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.trusted]

    def to_dict(self) -> dict:
        ev = self.eigenvalues
        return {
            **self.meta,
            "N": self.N,
            "N_check": self.N_check,
            "lambda_sym": [float(self.lambda_sym.real), float(self.lambda_sym.imag)],
            "omega_gap": float(self.omega_gap) if math.isfinite(self.omega_gap) else None,
            "simple": bool(self.simple),
            "delta_gap": self.delta_gap,
            "projector_defect": float(self.projector_defect),
            "eigen_defect": float(self.eigen_defect),
            "biorthogonality": float(self.biorthogonality),
            "trusted_count": int(np.sum(self.trusted)),
            "leading_trusted": [[float(z.real), float(z.imag)]
                                for z in sorted(ev[self.trusted], key=lambda z: -z.real)[:6]],
        }


def _trust_mask(ev: np.ndarray, ev_check: np.ndarray, tol: float = MATCH_TOL) -> np.ndarray:
    dist = np.min(np.abs(ev[:, None] - ev_check[None, :]), axis=1)
    return dist < tol * np.maximum(1.0, np.abs(ev))


def _weighted_eig(A: np.ndarray, G: np.ndarray):
    """Eigenpairs of A computed in the basis orthonormal for the Gram matrix G."""
    C = sla.cholesky(G, lower=False)
    B = C @ sla.solve_triangular(C, A.T, trans="T", lower=False).T
    ev, vl, vr = sla.eig(B, left=True, right=True)
    vr = sla.solve_triangular(C, vr, lower=False)
    vl = C.T @ vl
    return ev, vl, vr


def _projector_defect(f1, g1) -> float:
    """||P^2 - P||_2 for P = f1 g1^H / (g1^H f1), formed in extended precision."""
    f = np.asarray(f1).astype(np.clongdouble)
    gc = np.conj(np.asarray(g1).astype(np.clongdouble))
    P = np.outer(f, gc) / np.dot(gc, f)
    return float(np.linalg.norm((P @ P - P).astype(complex), 2))


def solve_spectrum(g: RadialGrid, m: Model, h: HeightFunction, N_check: int | None = None,
                   delta_gap: float = DELTA_GAP, weighted: bool = False, k: int | None = None,
                   eps1: float = 0.5, sym_tol: float = 1e-6) -> SpectrumReport:
    """Dense spectrum of L with trust filtering and the symmetry projector.

    Raises CheckFailure when the symmetry eigenvalue is missing, not
    isolated in the window Re >= -delta_gap/2, or not simple.
    """
    if g.R < light_cone_radius(h) * (1 - 1e-12):
        raise ConfigurationError("grid radius below the light-cone radius")
    if N_check is None:
        N_check = g.N + 16
    if N_check == g.N:
        raise ConfigurationError("N_check must differ from N")
    A = assemble_L(g, m, h).matrix
    if weighted:
        kk = k if k is not None else m.k_min
        ev, vl, vr = _weighted_eig(A, energy_gram(g, m.d, h, kk, eps1))
    else:
        ev, vl, vr = sla.eig(A, left=True, right=True)
    ev_check = sla.eigvals(assemble_L(build_grid(g.R, N_check), m, h).matrix)
    trusted = _trust_mask(ev, ev_check)

    near = np.abs(ev - 1.0)
    i1 = int(np.argmin(np.where(trusted, near, np.inf)))
    if not trusted[i1] or near[i1] > 1e-3:
        raise CheckFailure(f"no trusted eigenvalue near 1 for {m.kind} d={m.d}")
    lam1 = ev[i1]
    window = trusted & (ev.real >= -delta_gap / 2)
    if int(np.sum(window)) != 1 or abs(lam1 - 1.0) > sym_tol:
        raise CheckFailure(f"window Re >= {-delta_gap / 2} holds {int(np.sum(window))} trusted "
                           f"eigenvalues, nearest to 1 is {lam1}")
    others = trusted.copy()
    others[i1] = False
    omega = -float(np.max(ev[others].real)) if np.any(others) else math.inf

    f1 = vr[:, i1]
    l1 = vl[:, i1]
    # normalize f1 to the analytic symmetry mode
    a, b = symmetry_mode(m, h, g.rho)
    fstar = np.concatenate([a, b])
    f1 = f1 * (np.vdot(f1, fstar) / np.vdot(f1, f1))
    # f1 and l1 are nearly orthogonal for the larger d (|f1||g1| ~ 1e3), so the
    # pairing and the idempotency defect are evaluated in extended precision
    pair = complex(np.vdot(l1.astype(np.clongdouble), f1.astype(np.clongdouble)))
    cosine = abs(pair) / (np.linalg.norm(l1) * np.linalg.norm(f1))
    geometric = int(np.sum(trusted & (near < 1e-3)))
    simple = geometric == 1 and cosine > 1e-8
    if not simple:
        raise CheckFailure("symmetry eigenvalue is not simple")
    g1 = l1 / np.conj(pair)
    if np.all(np.abs(lam1.imag) < 1e-12) and np.max(np.abs(f1.imag)) < 1e-10 * np.max(np.abs(f1)):
        f1, g1, lam1 = f1.real.copy(), g1.real.copy(), complex(lam1.real)
    P = np.outer(f1, g1.conj())
    proj_def = _projector_defect(f1, g1)
    eig_def = float(np.max(np.abs(P @ fstar - fstar)))
    V = vr[:, others]
    V = V / np.linalg.norm(V, axis=0)
    bio = float(np.max(np.abs(g1.conj() @ V))) if V.size else 0.0
    meta = {"model": m.kind, "d": m.d, "s": m.s, "height": h.describe(), "R": g.R,
            "weighted": bool(weighted)}
    return SpectrumReport(ev, trusted, complex(lam1), omega, simple, f1, g1, proj_def, eig_def,
                          bio, g.N, int(N_check), delta_gap, meta)


def verify_symmetry_eigenpair(g: RadialGrid, m: Model, h: HeightFunction, k: int | None = None,
                              eps1: float = 0.5) -> float:
    """||(I - L) f1*||_{E^k} / ||f1*||_{E^k} on the grid."""
    kk = k if k is not None else m.k_min
    # the residual is formed in long double so that float64 roundoff noise,
    # which the derivatives inside E^k amplify, does not mask the defect
    gx = RadialGrid(g.R, g.N, np.longdouble)
    a, b = symmetry_mode(m, h, gx.rho)
    fx = np.concatenate([a, b])
    r = (fx - assemble_L(gx, m, h).matrix @ fx).astype(float)
    f = fx.astype(float)
    num = float(energy_form(g, m.d, h, r, None, kk, eps1)[0])
    den = float(energy_form(g, m.d, h, f, None, kk, eps1)[0])
    if den <= 0:
        raise AccuracyError("energy of the symmetry mode vanishes")
    return math.sqrt(max(num, 0.0) / den)


def mode_transform(h: HeightFunction, hbar: HeightFunction, lam: complex, f, g_src: RadialGrid,
                   g_tgt: RadialGrid, s: int = 0) -> np.ndarray:
    """Pull an even mode profile f from the h chart to the nodes of the hbar chart.

    fbar(rho_bar) = h_+^{-(lam+s)} f(rho_bar / h_+) with h_+ the transition scale.
    """
    f = np.asarray(f)
    scale = np.array([transition_scale(h, hbar, r) for r in g_tgt.rho])
    src = g_tgt.rho / scale
    if np.any(src > g_src.R * (1 + 1e-12)):
        raise DomainError("target nodes map outside the source grid")
    if h == hbar and g_src.R == g_tgt.R and g_src.N == g_tgt.N:
        vals = f.copy()
    else:
        vals = g_src.interp_matrix(np.minimum(src, g_src.R)) @ f
    return scale ** (-(lam + s)) * vals


def generalized_eigen_residual(g: RadialGrid, m: Model, lam: complex, F) -> np.ndarray:
    """Standard-chart eigen equation for gbar = rho^s F at the nodes rho > 0.

    F is the even profile of the first component on the standard chart.
    """
    if abs(g.R - 1.0) > 1e-12:
        raise ConfigurationError("the standard-chart equation lives on [0, 1]")
    F = np.asarray(F)
    s, d = m.s, m.d
    r = g.rho[1:]
    F0, F1, F2 = F[1:], (g.D1e @ F)[1:], (g.D2e @ F)[1:]
    g0 = r**s * F0
    g1 = s * r ** (s - 1) * F0 + r**s * F1
    g2 = s * (s - 1) * r ** (s - 2) * F0 + 2 * s * r ** (s - 1) * F1 + r**s * F2
    Vbar = potential_explicit(m, HeightFunction.standard(), r)
    return ((1 - r * r) * g2 + ((d - 2 * s - 1) / r - 2 * (lam + 1) * r) * g1
            - lam * (lam + 1) * g0 + (Vbar - s * (d - s - 2) / r**2) * g0)
