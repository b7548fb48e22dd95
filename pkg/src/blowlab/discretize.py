"""Even-parity Chebyshev collocation on [0, R] and the graded energy norms.

Grid functions live on the nonnegative half of a Chebyshev-Gauss-Lobatto
grid of even degree N on [-R, R]; operators are built on the full grid and
folded with the parity of the function they act on.  Integrals use exact
Gauss-Legendre quadrature of the polynomial interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BarycentricInterpolator
from scipy.special import gamma

from .coords import HeightFunction, height_eval
from .errors import AccuracyError, ConfigurationError


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


def cheb_matrix(N: int, dtype=np.float64):
    """Chebyshev-Gauss-Lobatto nodes cos(pi j/N) and differentiation matrix."""
    j = np.arange(N + 1).astype(dtype)
    pi = np.arccos(dtype(-1))
    x = np.cos(pi * j / N)
    if N % 2 == 0:
        x[N // 2] = 0.0
    c = np.ones(N + 1, dtype=dtype)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(N + 1, dtype=dtype))
    D -= np.diag(D.sum(axis=1))
    return x, D


@dataclass(eq=False)
class RadialGrid:
    """Half Chebyshev grid on [0, R] with parity-folded operators.

    dtype=np.longdouble gives the same operators in extended precision; such
    grids are used only for roundoff-free operator identities.
    """

    R: float
    N: int
    dtype: type = np.float64
    rho: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 8:
            raise ConfigurationError("N must be at least 8")
        if self.N % 2:
            raise ConfigurationError("N must be even so that rho = 0 is a node")
        if not self.R > 0:
            raise ConfigurationError("R must be positive")
        N = self.N
        x, Dx = cheb_matrix(N, self.dtype)
        self.x_full = x
        self.n = N // 2 + 1
        half = N // 2 - np.arange(self.n)  # full index of half node i
        self.rho = self.dtype(self.R) * x[half]
        self.rho[0] = 0.0
        self.rho[-1] = self.R
        E = np.zeros((N + 1, self.n), dtype=self.dtype)
        O = np.zeros((N + 1, self.n), dtype=self.dtype)
        for j in range(N + 1):
            if j <= N // 2:
                E[j, N // 2 - j] = 1.0
                if j < N // 2:
                    O[j, N // 2 - j] = 1.0
            else:
                E[j, j - N // 2] = 1.0
                O[j, j - N // 2] = -1.0
        self._even, self._odd = E, O
        D = Dx / self.dtype(self.R)
        self.D1e = (D @ E)[half]
        self.D1e[0] = 0.0
        self.D1o = (D @ O)[half]
        self.D2e = (D @ (D @ E))[half]
        self.D2o = (D @ (D @ O))[half]
        self.D2o[0] = 0.0
        Q = np.empty_like(self.D1e)
        Q[1:] = self.D1e[1:] / self.rho[1:, None]
        Q[0] = self.D2e[0]
        self.Q = Q
        self.rdr = self.rho[:, None] * self.D1e
        w = np.ones(N + 1)
        w[0] = w[-1] = 0.5
        w *= (-1.0) ** np.arange(N + 1)
        self._bary_w = w
        self.n_gl = N + 40

    @cached_property
    def _gauss(self):
        t, wt = leggauss(self.n_gl)
        return 0.5 * self.R * (t + 1.0), 0.5 * self.R * wt

    @property
    def gl_rho(self):
        return self._gauss[0]

    @property
    def gl_w(self):
        return self._gauss[1]

    @cached_property
    def I_even(self):
        return self.interp_matrix(self.gl_rho)

    @cached_property
    def I_odd(self):
        return self.interp_matrix(self.gl_rho, parity="odd")

    def interp_matrix(self, y, parity: str = "even"):
        """Matrix mapping half-grid values to values at points y in [-R, R]."""
        y = np.atleast_1d(np.asarray(y, dtype=float)) / self.R
        bary = BarycentricInterpolator(self.x_full.astype(float), np.eye(self.N + 1), wi=self._bary_w)
        B = np.asarray(bary(y))
        if B.ndim == 1:
            B = B[None, :]
        # exact node hits come back as identity rows already
        fold = self._even if parity == "even" else self._odd
        return B @ fold.astype(float)

    def dx_min(self) -> float:
        return float(np.min(np.diff(self.rho)))

    def laplacian(self, d: int) -> np.ndarray:
        return radial_laplacian(self, d)

    @lru_cache(maxsize=None)
    def quad_weights(self, d: int) -> np.ndarray:
        """Weights for the integral over the d-ball of an even grid function."""
        wq = sphere_area(d) * self.gl_w * self.gl_rho ** (d - 1)
        return self.I_even.T @ wq

    def integrate(self, f, d: int) -> float:
        return float(self.quad_weights(d) @ f)

    def boundary_measure(self, d: int) -> float:
        return sphere_area(d) * self.R ** (d - 1)

    def __hash__(self):
        return id(self)


def build_grid(R: float, N: int, dtype=np.float64) -> RadialGrid:
    return RadialGrid(float(R), int(N), dtype)


def radial_laplacian(g: RadialGrid, d: int) -> np.ndarray:
    """Matrix of f'' + (d-1) f'/rho on even grid functions (d f''(0) at the origin)."""
    return g.D2e + (d - 1) * g.Q


def _norm_sq_parity(g: RadialGrid, d: int, f, parity: str):
    I = g.I_even if parity == "even" else g.I_odd
    vals = I @ f
    wq = sphere_area(d) * g.gl_w * g.gl_rho ** (d - 1)
    if vals.ndim == 2:
        return wq @ (vals * vals)
    return float(wq @ (vals * vals))


def sobolev_norm(g: RadialGrid, d: int, f, k: int):
    """Radial form (sum_{j<=k} ||d_rho^j f||^2_{L^2(B)})^{1/2} for an even f.

    A 2-d f is treated as a batch of columns and gives an array of norms.
    """
    if k < 0:
        raise ConfigurationError("k must be nonnegative")
    if k > g.N // 2:
        raise AccuracyError(f"k={k} exceeds the resolution guard N/2={g.N // 2}")
    total = 0.0
    cur = np.asarray(f, dtype=float)
    parity = "even"
    for j in range(k + 1):
        total += _norm_sq_parity(g, d, cur, parity)
        if j < k:
            cur = (g.D1e if parity == "even" else g.D1o) @ cur
            parity = "odd" if parity == "even" else "even"
    if np.ndim(total):
        return np.sqrt(total)
    return math.sqrt(total)


def product_norm(g: RadialGrid, d: int, u, k: int):
    """||(u1, u2)||_{H^k x H^{k-1}} of a state or of the columns of a batch."""
    n = g.n
    u = np.asarray(u)
    a = sobolev_norm(g, d, u[:n], k)
    b = sobolev_norm(g, d, u[n:], k - 1)
    if np.ndim(a):
        return np.sqrt(a**2 + b**2)
    return math.sqrt(a**2 + b**2)


@dataclass
class StateVector:
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)
        if self.u1.shape != self.u2.shape:
            raise ConfigurationError("state components differ in length")
        if not (np.all(np.isfinite(self.u1)) and np.all(np.isfinite(self.u2))):
            raise ConfigurationError("state has non-finite entries")

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u1, self.u2])

    @classmethod
    def from_stacked(cls, u) -> "StateVector":
        u = np.asarray(u)
        n = u.size // 2
        return cls(u[:n].copy(), u[n:].copy())


def as_stacked(u) -> np.ndarray:
    if isinstance(u, StateVector):
        return u.stacked()
    return np.asarray(u, dtype=float)


# ---------------------------------------------------------------------------
# Cartesian tensor fields with radial coefficients.
#
# A component of a rank-r field is a dict mapping a partial matching of the
# slots {0..r-1} to a coefficient array of shape (n, m).  A matching is a pair
# (pairs, singles): each pair contributes a Kronecker delta, each single an x
# factor, and the coefficient is an even function of rho.  The m columns let
# the same code carry a single state (m = 1) or a linear map (m = 2n).


def _key(pairs, singles):
    return (tuple(sorted(tuple(sorted(p)) for p in pairs)), tuple(sorted(singles)))


def _add(comp, key, arr):
    if key in comp:
        comp[key] = comp[key] + arr
    else:
        comp[key] = arr


def _combine(*terms):
    out = {}
    for coef, comp in terms:
        for key, arr in comp.items():
            _add(out, key, coef * arr)
    return out


def _scale(comp, func):
    return {key: func[:, None] * arr for key, arr in comp.items()}


def _shift(key):
    pairs, singles = key
    return tuple((a + 1, b + 1) for a, b in pairs), tuple(s + 1 for s in singles)


@lru_cache(maxsize=None)
def _cycles(k1, k2):
    """Number of closed loops in the union of the delta graphs of two matchings."""
    slots = set(s for p in k1[0] for s in p) | set(k1[1])
    parent = {s: s for s in slots}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in k1[0] + k2[0]:
        parent[find(a)] = find(b)
    open_roots = {find(s) for s in k1[1] + k2[1]}
    return len({find(s) for s in slots} - open_roots)


class FieldOps:
    """Differential operators of the first-order formalism on tensor fields."""

    def __init__(self, g: RadialGrid, d: int, h: HeightFunction):
        self.g, self.d, self.h = g, d, h
        rho = g.rho
        h0, h1, h2, c, w = height_eval(h, rho)
        self.c, self.w = c, w
        self.hhat = h.slope_over_rho(rho)
        self.lap_h = h2 + (d - 1) * self.hhat
        self.lap = radial_laplacian(g, d)

    @cached_property
    def w_gl(self):
        return height_eval(self.h, self.g.gl_rho)[4]

    # scalar-invariant operators
    def rdr(self, comp):
        return {key: self.g.rdr @ arr + len(key[1]) * arr for key, arr in comp.items()}

    def laplacian(self, comp):
        out = {}
        for key, arr in comp.items():
            pairs, singles = key
            p = len(singles)
            _add(out, key, self.lap @ arr + 2 * p * (self.g.Q @ arr))
            for i, s in enumerate(singles):
                for t in singles[i + 1:]:
                    rest = tuple(x for x in singles if x not in (s, t))
                    _add(out, _key(pairs + ((s, t),), rest), 2.0 * arr)
        return out

    def partial(self, comp):
        """Gradient; the new slot is 0 and old slots shift by one."""
        out = {}
        for key, arr in comp.items():
            pairs, singles = _shift(key)
            _add(out, _key(pairs, singles + (0,)), self.g.Q @ arr)
            for s in singles:
                rest = tuple(x for x in singles if x != s)
                _add(out, _key(pairs + ((0, s),), rest), arr)
        return out

    def xmul(self, comp, func):
        """Multiply by x_0 func(rho) with the new slot 0."""
        out = {}
        for key, arr in comp.items():
            pairs, singles = _shift(key)
            _add(out, _key(pairs, singles + (0,)), func[:, None] * arr)
        return out

    # operators on pairs (F1, F2)
    def D0(self, F):
        F1, F2 = F
        w = self.w
        first = F2
        second = _combine(
            (1.0, _scale(self.laplacian(F1), 1.0 / w)),
            (-1.0, _scale(F2, self.lap_h / w)),
            (-2.0, _scale(self.rdr(F2), self.hhat / w)),
        )
        return first, second

    def Dspace(self, F):
        F1, F2 = F
        w, hh = self.w, self.hhat
        first = _combine((1.0, self.partial(F1)), (-1.0, self.xmul(F2, hh)))
        second = _combine(
            (-1.0, self.xmul(self.laplacian(F1), hh / w)),
            (1.0, self.xmul(F2, hh * self.lap_h / w)),
            (1.0, self.partial(F2)),
            (2.0, self.xmul(self.rdr(F2), hh * hh / w)),
        )
        return first, second

    def Lchi(self, F):
        F1, F2 = F
        cw = self.c / self.w
        first = _combine((-1.0, self.rdr(F1)), (1.0, _scale(F2, self.c)))
        second = _combine(
            (1.0, _scale(self.laplacian(F1), cw)),
            (-1.0, _scale(F2, 1.0 + cw * self.lap_h)),
            (-1.0, _scale(self.rdr(F2), 1.0 + 2.0 * cw * self.hhat)),
        )
        return first, second

    # integrals of full contractions; columnwise=True pairs column j of A
    # with column j of B, otherwise the full matrix of pairings is returned
    def inner(self, A, B, weight=None, columnwise=False):
        g, d = self.g, self.d
        base = sphere_area(d) * g.gl_w * g.gl_rho ** (d - 1)
        if weight is not None:
            base = base * weight
        YA = {k: g.I_even @ a for k, a in A.items()}
        YB = {k: g.I_even @ b for k, b in B.items()}
        total = 0.0
        for ka, ya in YA.items():
            pa = len(ka[1])
            acc = None
            for kb, yb in YB.items():
                q = pa + len(kb[1])
                fac = float(d) ** _cycles(ka, kb) * g.gl_rho ** q
                term = fac[:, None] * yb
                acc = term if acc is None else acc + term
            if columnwise:
                total = total + np.sum(ya * (base[:, None] * acc), axis=0)
            else:
                total = total + ya.T @ (base[:, None] * acc)
        return total

    def boundary(self, A, B, columnwise=False):
        g, d = self.g, self.d
        R = g.R
        total = 0.0
        for ka, a in A.items():
            for kb, b in B.items():
                q = len(ka[1]) + len(kb[1])
                fac = float(d) ** _cycles(ka, kb) * R**q
                if columnwise:
                    total = total + fac * a[-1] * b[-1]
                else:
                    total = total + fac * np.outer(a[-1], b[-1])
        return g.boundary_measure(d) * total

    def base_field(self):
        n = self.g.n
        eye = np.eye(n)
        zero = np.zeros((n, n))
        return ({((), ()): np.hstack([eye, zero])}, {((), ()): np.hstack([zero, eye])})

    def state_field(self, u):
        """Field of one state (vector) or a batch of states (columns)."""
        u = as_stacked(u)
        if u.ndim == 1:
            u = u[:, None]
        n = self.g.n
        return ({((), ()): u[:n]}, {((), ()): u[n:]})


def epsilon_k(d: int, k: int, eps1: float, R: float) -> float:
    """Boundary weight of the k-th energy for k < d/2 + 1."""
    out = eps1
    for i in range(1, k):
        out *= (d / 2.0 - i - eps1) * eps1 / R**2
    return out


def energy_gram(g: RadialGrid, d: int, h: HeightFunction, k: int, eps1: float = 0.5) -> np.ndarray:
    """Symmetric matrix G with E^k(u) = u^T G u for stacked states u."""
    if k < 1:
        raise ConfigurationError("energy order k must be >= 1")
    if not (0 < eps1 <= 0.5):
        raise ConfigurationError("eps1 must lie in (0, 1/2]")
    return _energy_gram_cached(g, d, h, k, float(eps1))


@lru_cache(maxsize=64)
def _energy_gram_cached(g, d, h, k, eps1):
    ops = FieldOps(g, d, h)
    G = _gram(ops, ops.base_field(), k, eps1)
    return 0.5 * (G + G.T)


def _gram(ops: FieldOps, F, k, eps1, Fp=None, columnwise=False):
    """Recursive E^k pairing of F with Fp (Fp defaults to F)."""
    d, R = ops.d, ops.g.R
    same = Fp is None
    Fp = F if same else Fp
    F1, F2 = F
    G1, G2 = Fp
    if k == 1:
        dF1 = ops.partial(F1)
        dG1 = dF1 if same else ops.partial(G1)
        return (ops.inner(dF1, dG1, columnwise=columnwise)
                + ops.inner(F2, G2, weight=ops.w_gl, columnwise=columnwise)
                + (2 * eps1 / R) * ops.boundary(F1, G1, columnwise=columnwise))
    out = 0.0
    for op in (ops.D0, ops.Dspace):
        out = out + _gram(ops, op(F), k - 1, eps1, None if same else op(Fp), columnwise)
    if k < d / 2.0 + 1:
        out = out + (2 * epsilon_k(d, k, eps1, R) / R) * ops.boundary(F1, G1, columnwise=columnwise)
    else:
        out = out + _gram(ops, F, k - 1, eps1, None if same else Fp, columnwise)
    return out


def energy_form(g: RadialGrid, d: int, h: HeightFunction, u, v, k: int, eps1: float = 0.5):
    """Columnwise E^k pairings (u_j | v_j) of stacked states (vectors or columns)."""
    if k < 1:
        raise ConfigurationError("energy order k must be >= 1")
    ops = FieldOps(g, d, h)
    U = ops.state_field(u)
    V = None if v is None else ops.state_field(v)
    out = _gram(ops, U, k, float(eps1), V, columnwise=True)
    return out


def energy_norm(g: RadialGrid, m, h: HeightFunction, u, k: int, eps1: float = 0.5) -> float:
    """||u||_{E^k} evaluated exactly on the grid interpolant."""
    if not (0 < eps1 <= 0.5):
        raise ConfigurationError("eps1 must lie in (0, 1/2]")
    val = energy_form(g, m.d, h, as_stacked(u), None, k, eps1)
    return math.sqrt(max(float(np.ravel(val)[0]), 0.0))


def apply_Dmu_radial(g: RadialGrid, m, h: HeightFunction, u, mu_class: str):
    """D_0 u, or the odd radial parts p with D_i u = (x_i/|x|) p(rho)."""
    ops = FieldOps(g, m.d, h)
    F = ops.state_field(u)
    if mu_class == "time":
        a, b = ops.D0(F)
        return StateVector(a[((), ())][:, 0], b[((), ())][:, 0])
    if mu_class == "space":
        a, b = ops.Dspace(F)
        key = ((), (0,))
        return StateVector(g.rho * a[key][:, 0], g.rho * b[key][:, 0])
    raise ConfigurationError("mu_class must be 'time' or 'space'")
