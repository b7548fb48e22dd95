"""Dense collocation matrices of the linearized flow and related diagnostics.

States are stacked as (u1, u2) on the half grid.  No boundary rows are
modified: for R >= R0 the outer boundary is an outflow boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coords import HeightFunction, height_eval, light_cone_radius
from .discretize import FieldOps, RadialGrid, as_stacked, energy_form, radial_laplacian
from .errors import ConfigurationError
from .models import Model, potential


@dataclass(eq=False)
class OperatorMatrix:
    matrix: np.ndarray
    name: str
    meta: dict = field(default_factory=dict)

    def __matmul__(self, u):
        return self.matrix @ as_stacked(u)

    def __add__(self, other):
        return OperatorMatrix(self.matrix + other.matrix, f"{self.name}+{other.name}", dict(self.meta))

    @property
    def shape(self):
        return self.matrix.shape


def _check_radius(g: RadialGrid, h: HeightFunction):
    r0 = light_cone_radius(h)
    if g.R < r0 * (1 - 1e-12):
        raise ConfigurationError(f"grid radius {g.R} is inside the light cone radius {r0}")


def _geometry(g: RadialGrid, h: HeightFunction, d: int):
    h0, h1, h2, c, w = height_eval(h, g.rho)
    hhat = h.slope_over_rho(g.rho)
    lap_h = h2 + (d - 1) * hhat
    return c, w, hhat, lap_h


def assemble_Lchi(g: RadialGrid, d: int, h: HeightFunction) -> OperatorMatrix:
    """Free wave generator in similarity coordinates (no rescaling shift)."""
    _check_radius(g, h)
    c, w, hhat, lap_h = _geometry(g, h, d)
    n = g.n
    cw = c / w
    lap = radial_laplacian(g, d)
    A = np.zeros((2 * n, 2 * n), dtype=g.dtype)
    A[:n, :n] = -g.rdr
    A[:n, n:] = np.diag(c)
    A[n:, :n] = cw[:, None] * lap
    A[n:, n:] = -np.diag(1.0 + cw * lap_h) - (1.0 + 2.0 * cw * hhat)[:, None] * g.rdr
    return OperatorMatrix(A, "L_chi", {"d": d, "height": h.describe(), "N": g.N, "R": g.R})


def assemble_L0(g: RadialGrid, m: Model, h: HeightFunction) -> OperatorMatrix:
    L = assemble_Lchi(g, m.d, h)
    A = L.matrix - m.s * np.eye(2 * g.n, dtype=g.dtype)
    return OperatorMatrix(A, "L0", {**L.meta, "model": m.kind, "s": m.s})


def assemble_LV(g: RadialGrid, m: Model, h: HeightFunction) -> OperatorMatrix:
    _check_radius(g, h)
    _, _, _, c, w = height_eval(h, g.rho)
    n = g.n
    A = np.zeros((2 * n, 2 * n), dtype=g.dtype)
    A[n:, :n] = np.diag(c / w * potential(m, h, g.rho))
    return OperatorMatrix(A, "L_V", {"model": m.kind, "d": m.d, "height": h.describe(), "N": g.N})


def assemble_L(g: RadialGrid, m: Model, h: HeightFunction) -> OperatorMatrix:
    """Full linearized generator L = L0 + L'_V."""
    out = assemble_L0(g, m, h) + assemble_LV(g, m, h)
    out.name = "L"
    return out


def assemble_D0(g: RadialGrid, d: int, h: HeightFunction) -> np.ndarray:
    c, w, hhat, lap_h = _geometry(g, h, d)
    n = g.n
    A = np.zeros((2 * n, 2 * n), dtype=g.dtype)
    A[:n, n:] = np.eye(n)
    A[n:, :n] = (1.0 / w)[:, None] * radial_laplacian(g, d)
    A[n:, n:] = -np.diag(lap_h / w) - (2.0 * hhat / w)[:, None] * g.rdr
    return A


def box_chi_coefficients(h: HeightFunction, rho, d: int):
    """(c00, cr0, crr, c0, cr) of the Laplace-Beltrami operator in a chart.

    Box_chi v = e^{2 tau}(c00 v_tt + cr0 v_rt + crr v_rr + (d-1)/rho v_r + c0 v_t + cr v_r)
    with t = tau and r = rho; the (d-1)/rho term carries its even limit.
    """
    rho = np.asarray(rho, dtype=float)
    h0, h1, h2, c, w = height_eval(h, rho)
    hhat = h.slope_over_rho(rho)
    c00 = -w / c**2
    cr0 = -2.0 * (rho - h0 * h1) / c**2
    crr = (h0 * h0 - rho * rho) / c**2
    corr = (crr * h2 + (d - 1) * hhat) / c
    c0 = c00 - corr
    cr = cr0 - rho * corr
    return c00, cr0, crr, c0, cr


def assemble_box_chi(g: RadialGrid, h: HeightFunction, d: int = 5):
    return box_chi_coefficients(h, g.rho, d)


def box_chi_mode(g: RadialGrid, h: HeightFunction, d: int, lam: complex, f) -> np.ndarray:
    """e^{-(lam+2) tau} Box_chi (e^{lam tau} f) on the grid."""
    c00, cr0, crr, c0, cr = box_chi_coefficients(h, g.rho, d)
    f = np.asarray(f)
    df = g.D1e @ f
    return (crr * (g.D2e @ f) + (d - 1) * (g.Q @ f) + (lam * cr0 + cr) * df
            + lam * (lam * c00 + c0) * f)


def profile_residual(g: RadialGrid, m: Model, h: HeightFunction) -> np.ndarray:
    """Residual of Box_chi psi* + F(psi*) for the self-similar solution in a chart.

    The profile u = psi*(-h, rho) satisfies (psi* o chi) = e^{s tau} u, so the
    residual is Box_chi(e^{s tau} u) e^{-(s+2) tau} + F(rho, u).
    """
    from .models import nonlinearity, profile_on_slice

    u, _ = profile_on_slice(m, h, g.rho)
    return box_chi_mode(g, h, m.d, m.s, u) + nonlinearity(m, g.rho, u)[0]


def commutator_defect(g: RadialGrid, m, h: HeightFunction, tests,
                      precision: str = "extended") -> dict:
    """Max sup-norm defect of D_mu L_chi - L_chi D_mu + D_mu on test states.

    Tests are stacked states or callables rho -> (f1, f2).  With
    precision="extended" the same collocation operators are applied in long
    double arithmetic, so that the reported defect is the discretization
    defect rather than float64 roundoff of chained differentiation matrices.
    """
    d = m.d if hasattr(m, "d") else int(m)
    if precision == "extended":
        g = RadialGrid(g.R, g.N, np.longdouble)
    elif precision != "double":
        raise ConfigurationError("precision must be 'double' or 'extended'")
    Lchi = assemble_Lchi(g, d, h).matrix
    D0 = assemble_D0(g, d, h)
    ops = FieldOps(g, d, h)
    time_def = 0.0
    space_def = 0.0
    for u in tests:
        if callable(u):
            u = np.concatenate([np.asarray(v, dtype=g.dtype) for v in u(g.rho)])
        else:
            u = as_stacked(u).astype(g.dtype)
        r = D0 @ (Lchi @ u) - Lchi @ (D0 @ u) + D0 @ u
        time_def = max(time_def, float(np.max(np.abs(r))))
        F = ops.state_field(u)
        a = ops.Dspace(ops.Lchi(F))
        b = ops.Lchi(ops.Dspace(F))
        c = ops.Dspace(F)
        for comp in range(2):
            keys = set(a[comp]) | set(b[comp]) | set(c[comp])
            for key in keys:
                z = np.zeros((g.n, 1), dtype=g.dtype)
                diff = a[comp].get(key, z) - b[comp].get(key, z) + c[comp].get(key, z)
                radial = g.rho[:, None] ** len(key[1]) * diff
                space_def = max(space_def, float(np.max(np.abs(radial))))
    return {"time": time_def, "space": space_def, "max": max(time_def, space_def)}


def random_states(g: RadialGrid, count: int, seed: int = 0, degree: int | None = None,
                  decay: float = 0.6) -> np.ndarray:
    """Band-limited random even states as columns of a (2n, count) array."""
    rng = np.random.default_rng(seed)
    if degree is None:
        degree = max(2, g.N // 4)
    x = g.rho / g.R
    T = np.cos(np.outer(np.arccos(np.clip(x, -1, 1)), 2 * np.arange(degree + 1)))
    env = decay ** np.arange(degree + 1)
    c1 = rng.standard_normal((degree + 1, count)) * env[:, None]
    c2 = rng.standard_normal((degree + 1, count)) * env[:, None]
    return np.vstack([T @ c1, T @ c2])


def dissipativity_bound_parts(d: int, k: int, eps1: float, R: float):
    """(norm factor, boundary factor) of the dissipative estimate."""
    from .discretize import epsilon_k

    if k < d / 2.0 + 1:
        return d / 2.0 - k, (-d / 2.0 + k + eps1) * 2.0 * epsilon_k(d, k, eps1, R) / R
    return eps1, 0.0


def dissipativity_check(g: RadialGrid, m, h: HeightFunction, k: int, eps1: float = 0.5,
                        trials: int = 100, seed: int = 0, states=None) -> dict:
    """Max violation of Re(L_chi f | f)_{E^k} <= bound over unit-norm random states."""
    d = m.d if hasattr(m, "d") else int(m)
    U = random_states(g, trials, seed) if states is None else np.asarray(states)
    if U.ndim == 1:
        U = U[:, None]
    Lchi = assemble_Lchi(g, d, h).matrix
    norms = energy_form(g, d, h, U, None, k, eps1)
    scale = np.where(norms > 0, 1.0 / np.sqrt(np.maximum(norms, 1e-300)), 0.0)
    U = U * scale[None, :]
    lhs = energy_form(g, d, h, Lchi @ U, U, k, eps1)
    nrm = energy_form(g, d, h, U, None, k, eps1)
    bdry = g.boundary_measure(d) * U[g.n - 1] ** 2
    a, b = dissipativity_bound_parts(d, k, eps1, g.R)
    bound = a * nrm + b * bdry
    viol = lhs - bound
    return {
        "d": d,
        "k": k,
        "eps1": eps1,
        "trials": int(U.shape[1]),
        "max_violation": float(np.max(viol)) if viol.size else 0.0,
        "min_margin": float(np.min(bound - lhs)) if viol.size else 0.0,
        "case": "boundary" if k < d / 2.0 + 1 else "lower_order",
    }


def symmetry_residual_vector(g: RadialGrid, m: Model, h: HeightFunction) -> np.ndarray:
    from .models import symmetry_mode

    f1, f2 = symmetry_mode(m, h, g.rho)
    f = np.concatenate([f1, f2])
    return f - assemble_L(g, m, h) @ f
