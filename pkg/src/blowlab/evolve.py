"""Time evolution in similarity coordinates and the blowup-time shooting.

The evolution variables are the rescaled perturbation (u1, u2) of the
blowup solution psi*_T; the state at tau = 0 comes from the initial-data
operator, and the blowup time T is tuned so that the unstable component
vanishes at a final time tau_f.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from . import _kernels
from .coords import CoordChart, HeightFunction, height_eval
from .discretize import RadialGrid, StateVector, as_stacked, energy_form, product_norm
from .errors import AccuracyError, ConfigurationError, DivergenceError, DomainError, TuningError
from .linops import OperatorMatrix, assemble_L
from .models import WAVE_MAPS, Model, nonlinear_remainder_values, profile_derivatives, profile_on_slice, symmetry_mode

DIVERGENCE_GUARD = 1e6
SAMPLE_DT = 0.05
GAUSS_WIDTH = 6.0


class AccuracyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PerturbationSpec:
    """Radial data (f, g) = delta * (phi, g_ratio * phi) supported in the ball of radius r."""

    family: str = "bump"
    delta: float = 1e-3
    radius: float = 0.5
    g_ratio: float = 1.0

    def __post_init__(self):
        if self.family not in ("bump", "gaussian", "zero"):
            raise ConfigurationError(f"unknown perturbation family {self.family!r}")
        if not self.radius > 0:
            raise ConfigurationError("support radius must be positive")

    @property
    def is_zero(self) -> bool:
        return self.family == "zero" or self.delta == 0.0

    def shape(self, x) -> np.ndarray:
        x = np.abs(np.asarray(x, dtype=float))
        y = x / self.radius
        out = np.zeros_like(y)
        inside = y < 1.0
        if self.family == "bump":
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - y[inside] ** 2))
        elif self.family == "gaussian":
            # exp(-36) at the edge, below double precision relative to the peak
            out[inside] = np.exp(-((GAUSS_WIDTH * y[inside]) ** 2))
        return out

    def profiles(self, x):
        if self.is_zero:
            z = np.zeros_like(np.asarray(x, dtype=float))
            return z, z.copy()
        phi = self.delta * self.shape(x)
        return phi, self.g_ratio * phi


def admissible_window(h: HeightFunction, p: PerturbationSpec) -> float:
    """Half width eps/(r+eps) of the admissible T window."""
    plateau = h.plateau_radius
    if p.radius >= plateau:
        raise ConfigurationError(
            f"support radius {p.radius} must lie inside the plateau radius {plateau}")
    if math.isinf(plateau):
        return 1.0
    eps = plateau - p.radius
    return eps / (p.radius + eps)


def initial_data(m: Model, chart: CoordChart, p: PerturbationSpec, T: float,
                 g: RadialGrid) -> StateVector:
    """U(f, T) = f_T + Psi^1_T - Psi^T_T on the grid."""
    h = chart.height
    w = admissible_window(h, p)
    if not (1 - w <= T <= 1 + w) or T <= 0:
        raise DomainError(f"T={T} lies outside the admissible window [{1 - w}, {1 + w}]")
    rho = g.rho
    s = m.s
    f, gg = p.profiles(T * rho)
    u1 = T**s * f
    u2 = T ** (s + 1) * gg
    if T != 1.0:
        h0 = h(rho)[0]
        t_one = 1.0 / T - 1.0 - h0
        psi_a, psit_a, *_ = profile_derivatives(m, t_one, rho)
        psi_b, psit_b, *_ = profile_derivatives(m, -h0, rho)
        u1 = u1 + (psi_a - psi_b)
        u2 = u2 + (-psit_a + psit_b)
    return StateVector(u1, u2)


def max_wave_speed(g: RadialGrid, h: HeightFunction) -> float:
    """Largest characteristic speed of the principal part over the grid."""
    _, h1, _, c, w = height_eval(h, g.rho)
    b = g.rho + 2 * c / w * h1
    tr = -g.rho - b
    det = g.rho * b - c * c / w
    disc = np.sqrt(np.maximum(tr * tr / 4 - det, 0.0))
    return float(np.max(np.abs(tr / 2) + disc))


def timestep(g: RadialGrid, h: HeightFunction, L) -> float:
    """0.5 min(min node spacing / max speed, 1 / spectral radius of L)."""
    A = L.matrix if isinstance(L, OperatorMatrix) else np.asarray(L)
    radius = float(np.max(np.abs(sla.eigvals(A))))
    return 0.5 * min(g.dx_min() / max_wave_speed(g, h), 1.0 / radius)


@dataclass(eq=False)
class Trajectory:
    taus: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    hnorm: np.ndarray
    projection: np.ndarray
    sup: np.ndarray
    grid: RadialGrid
    model: Model
    height: HeightFunction
    T: float = 1.0
    dtau: float = 0.0
    nonlinear: bool = False
    k: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.taus) > 1 and np.any(np.diff(self.taus) <= 0):
            raise ConfigurationError("trajectory times must increase strictly")

    def __len__(self):
        return len(self.taus)

    def state(self, i: int) -> StateVector:
        return StateVector.from_stacked(self.states[i])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def rows(self):
        """(tau, E^k, H-norm, projection, sup) per sample."""
        return [(float(t), float(e), float(hn), float(pr), float(su))
                for t, e, hn, pr, su in zip(self.taus, self.energy, self.hnorm,
                                            self.projection, self.sup)]


def _diagnostics(g, m, h, states, k, eps1, g1):
    U = states.T
    if U.shape[1] == 0:
        empty = np.zeros(0)
        return empty, empty, empty, empty
    energy = np.sqrt(np.maximum(energy_form(g, m.d, h, U, None, k, eps1), 0.0))
    hnorm = np.atleast_1d(product_norm(g, m.d, U, k))
    proj = np.real(U.T @ np.conj(g1)) if g1 is not None else np.full(U.shape[1], np.nan)
    sup = np.max(np.abs(U), axis=0)
    return energy, hnorm, proj, sup


def integrate(L, m: Model, h: HeightFunction, g: RadialGrid, u0, tau_max: float,
              dtau: float | None = None, nonlinear: bool = False, sample_dt: float = SAMPLE_DT,
              k: int | None = None, eps1: float = 0.5, g1=None, T: float = 1.0,
              guard: float = DIVERGENCE_GUARD, use_numba: bool | None = None) -> Trajectory:
    """Classical RK4 for d/dtau u = L u (+ N(u)).

    Raises DivergenceError (with the partial trajectory attached) when the
    sup norm exceeds the guard.
    """
    A = L.matrix if isinstance(L, OperatorMatrix) else np.asarray(L, dtype=float)
    u0 = as_stacked(u0).astype(float)
    if A.shape != (2 * g.n, 2 * g.n) or u0.shape != (2 * g.n,):
        raise ConfigurationError("operator, state and grid sizes disagree")
    if tau_max <= 0:
        raise ConfigurationError("tau_max must be positive")
    if dtau is None:
        dtau = timestep(g, h, A)
    nsteps = max(1, math.ceil(tau_max / dtau - 1e-9))
    dtau = tau_max / nsteps
    stride = max(1, int(round(sample_dt / dtau)))
    while nsteps % stride:
        stride -= 1
    kk = k if k is not None else m.k_min
    psi, _ = profile_on_slice(m, h, g.rho)
    _, _, _, c, w = height_eval(h, g.rho)
    kind = _kernels.WM_CODE if m.kind == WAVE_MAPS else _kernels.YM_CODE
    samples, steps, status = _kernels.rk4_run(A, u0, dtau, nsteps, stride, g.rho, psi, c / w,
                                              m.d, kind, nonlinear, guard, use_numba)
    nsamp = steps // stride + 1 if status == _kernels.STATUS_OK else (steps - 1) // stride + 1
    samples = np.array(samples[:nsamp])
    taus = np.arange(nsamp) * stride * dtau
    diag = _diagnostics(g, m, h, samples, kk, eps1, g1)
    traj = Trajectory(taus, samples, *diag, grid=g, model=m, height=h, T=T, dtau=dtau,
                      nonlinear=nonlinear, k=kk, meta={"stride": stride, "steps": int(steps)})
    if status != _kernels.STATUS_OK:
        err = DivergenceError(f"sup norm exceeded {guard} at tau={steps * dtau}", steps * dtau)
        err.trajectory = traj
        raise err
    return traj


def unstable_pair(g: RadialGrid, m: Model, h: HeightFunction, L=None):
    """(lambda, f1, g1) for the eigenvalue of L nearest 1, with <g1, f1> = 1.

    f1 is scaled to best match the analytic symmetry mode on the grid.
    """
    A = assemble_L(g, m, h).matrix if L is None else (
        L.matrix if isinstance(L, OperatorMatrix) else np.asarray(L))
    ev, vl, vr = sla.eig(A, left=True, right=True)
    i = int(np.argmin(np.abs(ev - 1.0)))
    a, b = symmetry_mode(m, h, g.rho)
    fstar = np.concatenate([a, b])
    f1 = vr[:, i] * (np.vdot(vr[:, i], fstar) / np.vdot(vr[:, i], vr[:, i]))
    g1 = vl[:, i] / np.conj(np.vdot(vl[:, i], f1))
    return complex(ev[i]), np.real(f1), np.real(g1)


@dataclass
class TuningResult:
    T_star: float
    phi: float
    trajectory: Trajectory
    evaluations: int
    window: tuple


def _linear_guess(m, chart, p, g, g1, lo, hi) -> float:
    # zero of the unstable projection of the data at tau = 0
    def proj(T):
        return float(np.dot(g1, initial_data(m, chart, p, T, g).stacked()))

    a, b = proj(lo), proj(hi)
    if a * b > 0:
        return 1.0
    return brentq(proj, lo, hi, xtol=1e-15)


def _bracket(phi, guess, lo, hi, step=1e-7):
    """Expand a bracket around guess until phi changes sign."""
    f0 = phi(guess)
    if f0 == 0.0:
        return guess, guess
    while True:
        a, b = max(lo, guess - step), min(hi, guess + step)
        fa, fb = phi(a), phi(b)
        if fa * f0 <= 0:
            return a, guess
        if fb * f0 <= 0:
            return guess, b
        if a == lo and b == hi:
            raise TuningError(f"Phi has no sign change on [{lo}, {hi}] ({fa}, {fb})")
        step *= 20.0


def tune_blowup_time(m: Model, chart: CoordChart, p: PerturbationSpec, g: RadialGrid,
                     tau_f: float, window: float = 0.05, dtau: float | None = None,
                     pair=None, k: int | None = None, sample_dt: float = SAMPLE_DT,
                     xtol: float = 1e-15):
    """Find T* with Phi(T*) = e^{-tau_f} <g1, u_T(tau_f)> = 0.

    Returns (T*, trajectory); the full record is in trajectory.meta["tuning"].
    """
    h = chart.height
    w = min(window, admissible_window(h, p))
    L = assemble_L(g, m, h)
    if dtau is None:
        dtau = timestep(g, h, L)
    lam, f1, g1 = pair if pair is not None else unstable_pair(g, m, h, L)
    count = 0

    def run(T):
        u0 = initial_data(m, chart, p, T, g)
        return integrate(L, m, h, g, u0, tau_f, dtau, nonlinear=True, sample_dt=sample_dt,
                         k=k, g1=g1, T=T)

    def phi(T):
        nonlocal count
        count += 1
        try:
            traj = run(T)
        except DivergenceError as err:
            last = err.trajectory.projection[-1] if len(err.trajectory) else 0.0
            return math.copysign(1.0, last) if last else 1.0
        return math.exp(-tau_f) * float(traj.projection[-1])

    if p.is_zero:
        traj = run(1.0)
        traj.meta["tuning"] = {"T_star": 1.0, "phi": 0.0, "evaluations": 1, "window": [1.0, 1.0]}
        return 1.0, traj
    lo, hi = _bracket(phi, _linear_guess(m, chart, p, g, g1, 1.0 - w, 1.0 + w), 1.0 - w, 1.0 + w)
    T_star = lo if lo == hi else brentq(phi, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    traj = run(T_star)
    value = math.exp(-tau_f) * float(traj.projection[-1])
    traj.meta["tuning"] = {"T_star": T_star, "phi": value, "evaluations": count,
                           "window": [1.0 - w, 1.0 + w], "bracket": [lo, hi], "lambda_unstable": [lam.real, lam.imag]}
    return T_star, traj


def decay_rate(t: Trajectory, window, norm: str = "hnorm") -> float:
    """-slope of a least-squares fit of log ||u(tau)|| over the window."""
    tau1, tau2 = window
    if tau1 >= tau2:
        raise ConfigurationError("decay window must have tau1 < tau2")
    if tau1 < t.taus[0] - 1e-12 or tau2 > t.taus[-1] + 1e-12:
        raise ConfigurationError("decay window lies outside the trajectory")
    series = {"hnorm": t.hnorm, "energy": t.energy, "sup": t.sup,
              "projection": np.abs(t.projection)}.get(norm)
    if series is None:
        raise ConfigurationError(f"unknown norm {norm!r}")
    sel = (t.taus >= tau1 - 1e-12) & (t.taus <= tau2 + 1e-12)
    vals = series[sel]
    if vals.size < 2:
        raise ConfigurationError("decay window holds fewer than two samples")
    if np.any(~(vals > 0)):
        raise DomainError("norms must be positive for a logarithmic fit")
    slope = np.polyfit(t.taus[sel], np.log(vals), 1)[0]
    return float(-slope)


@dataclass
class FiniteSpeedReport:
    max_deviation: float
    samples: int
    skipped: bool = False
    reason: str = ""


def finite_speed_check(t: Trajectory, chart: CoordChart, m: Model,
                       p: PerturbationSpec) -> FiniteSpeedReport:
    """Max |psi - psi*_1| over recorded points inside {0 < t < |x| - r}."""
    h = chart.height
    if p.radius >= h.plateau_radius:
        warnings.warn("perturbation support reaches the plateau edge; finite-speed check skipped",
                      stacklevel=2)
        return FiniteSpeedReport(0.0, 0, True, "support not inside plateau")
    g = t.grid
    T = t.T
    h0 = h(g.rho)[0]
    psi_slice, _ = profile_on_slice(m, h, g.rho)
    worst = 0.0
    count = 0
    n = g.n
    for tau, u in zip(t.taus, t.states):
        scale = T * math.exp(-tau)
        time = T + scale * h0
        rad = scale * g.rho
        inside = (time > 0) & (time < rad - p.radius)
        if not np.any(inside):
            continue
        psi = scale ** (-m.s) * (psi_slice[inside] + u[:n][inside])
        ref = profile_derivatives(m, 1.0 - time[inside], rad[inside])[0]
        worst = max(worst, float(np.max(np.abs(psi - ref))))
        count += int(np.sum(inside))
    return FiniteSpeedReport(worst, count, False, "" if count else "empty intersection")


def lyapunov_correction(t: Trajectory, pair, m: Model, g: RadialGrid) -> np.ndarray:
    """P1 u(0) + P1 int_0^inf e^{-tau} N(u(tau)) dtau by the trapezoid rule on the samples."""
    _, f1, g1 = pair
    h = t.height
    n = g.n
    psi, _ = profile_on_slice(m, h, g.rho)
    _, _, _, c, w = height_eval(h, g.rho)
    cw = c / w
    coeffs = np.empty(len(t))
    for i, u in enumerate(t.states):
        Nu = cw * nonlinear_remainder_values(m, g.rho, psi, u[:n])
        coeffs[i] = math.exp(-t.taus[i]) * float(np.dot(g1[n:], Nu))
    tail = abs(coeffs[-1]) if len(coeffs) else 0.0
    if tail > 1e-10:
        warnings.warn(f"e^-tau <g1, N(u)> = {tail:.2e} at the final sample has not decayed "
                      "below 1e-10", AccuracyWarning, stacklevel=2)
    integral = float(np.trapezoid(coeffs, t.taus)) if len(coeffs) > 1 else 0.0
    return (float(np.dot(g1, t.states[0])) + integral) * f1
