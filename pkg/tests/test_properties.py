import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from blowlab.cli import dump_csv
from blowlab.coords import CoordChart, HeightFunction, from_physical, light_cone_radius, to_physical
from blowlab.discretize import build_grid, energy_form
from blowlab.evolve import PerturbationSpec, Trajectory, decay_rate, initial_data
from blowlab.linops import assemble_L
from blowlab.models import Model, blowup_profile, nonlinear_remainder_values, nonlinearity

FAST = settings(max_examples=40, deadline=None)
MODELS = st.sampled_from([Model("wm", 5), Model("wm", 6), Model("wm", 9), Model("ym", 7), Model("ym", 11)])
HEIGHTS = st.sampled_from([HeightFunction.standard(), HeightFunction.hyperboloidal(1.0, 1.0),
                           HeightFunction.hyperboloidal(0.5, 2.0),
                           HeightFunction.flattened_cone(0.5, 1.0, 0.25)])
GRID = build_grid(1.0, 24)


@FAST
@given(HEIGHTS, st.floats(0.5, 2.0), st.floats(0.0, 5.0), st.floats(0.0, 1.0))
def test_chart_round_trip(h, T, tau, frac):
    chart = CoordChart(h, T)
    rho = frac * chart.R
    e = to_physical(chart, tau, rho)
    back = from_physical(chart, e)
    assert abs(back[0] - tau) < 1e-11
    assert abs(back[1] - rho) < 1e-11 * max(1.0, rho)


@FAST
@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0))
def test_hyperboloidal_light_cone_root(alpha, beta):
    h = HeightFunction.hyperboloidal(alpha, beta)
    R0 = light_cone_radius(h)
    assert abs(h(R0)[0] + R0) < 1e-12


@FAST
@given(MODELS, st.floats(0.05, 20.0), st.floats(0.05, 3.0), st.floats(0.0, 4.0))
def test_profile_self_similarity(m, lam, t, r):
    lhs = blowup_profile(m, lam * t, lam * r).psi
    rhs = lam ** (-m.s) * blowup_profile(m, t, r).psi
    assert math.isclose(lhs, rhs, rel_tol=1e-11, abs_tol=1e-13)


@FAST
@given(MODELS, st.floats(0.0, 3.0), st.floats(-3.0, 3.0), st.floats(-1.0, 1.0))
def test_remainder_is_second_order_difference(m, r, psi, z):
    F = lambda v: float(nonlinearity(m, r, v)[0])
    direct = F(psi + z) - F(psi) - float(nonlinearity(m, r, psi)[1]) * z
    got = float(nonlinear_remainder_values(m, r, psi, z))
    scale = max(1.0, abs(F(psi + z)), abs(F(psi)))
    assert abs(got - direct) < 1e-10 * scale
    assert float(nonlinear_remainder_values(m, r, psi, 0.0)) == 0.0


@FAST
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=12))
def test_even_polynomials_differentiate_exactly(coeffs):
    s = GRID.rho**2
    p = np.polyval(coeffs, s)
    dp = 2 * GRID.rho * np.polyval(np.polyder(coeffs), s) if len(coeffs) > 1 else 0 * s
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    assert np.max(np.abs(GRID.D1e @ p - dp)) < 1e-10 * scale * len(coeffs)


@FAST
@given(st.integers(0, 2**31), st.integers(1, 4), HEIGHTS)
def test_energy_is_nonnegative(seed, k, h):
    g = build_grid(max(1.0, light_cone_radius(h)), 16)
    rng = np.random.default_rng(seed)
    s = g.rho**2
    u = np.concatenate([np.polyval(rng.standard_normal(5), s), np.polyval(rng.standard_normal(5), s)])
    assert float(energy_form(g, 5, h, u, None, k)[0]) >= 0.0


@FAST
@given(MODELS, st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_generator_is_linear(m, seed, a, b):
    L = assemble_L(GRID, m, HeightFunction.standard()).matrix
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(2 * GRID.n), rng.standard_normal(2 * GRID.n)
    lhs = L @ (a * u + b * v)
    rhs = a * (L @ u) + b * (L @ v)
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * (1 + np.max(np.abs(L)) * (abs(a) + abs(b)))


@FAST
@given(MODELS, st.floats(1e-6, 1e-1), st.floats(0.1, 0.7))
def test_unshifted_initial_data_is_the_perturbation(m, delta, radius):
    h = HeightFunction.flattened_cone(0.5, 1.0, 0.25)
    g = build_grid(light_cone_radius(h), 16)
    p = PerturbationSpec("bump", delta, radius)
    u = initial_data(m, CoordChart(h), p, 1.0, g)
    f, gg = p.profiles(g.rho)
    assert np.array_equal(u.u1, f) and np.array_equal(u.u2, gg)


@FAST
@given(st.floats(-3.0, 3.0), st.floats(0.01, 10.0))
def test_decay_rate_recovers_exponent(omega, amp):
    taus = np.linspace(0.0, 4.0, 81)
    vals = amp * np.exp(-omega * taus)
    t = Trajectory(taus, np.zeros((81, 2 * GRID.n)), vals, vals, vals, vals, GRID, Model("wm", 5),
                   HeightFunction.standard())
    assert abs(decay_rate(t, (0.5, 3.5)) - omega) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=10))
def test_csv_floats_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "v.csv"
    dump_csv(["x"], [(v,) for v in values], path)
    back = [float(line) for line in path.read_text().splitlines()[1:]]
    assert back == values
