import math

import numpy as np
import pytest

from blowlab.coords import HeightFunction
from blowlab.errors import ConfigurationError, DomainError, SingularityError
from blowlab.models import (Model, blowup_profile, nonlinear_remainder, nonlinear_remainder_values,
                            nonlinearity, potential, potential_explicit, profile_derivatives,
                            reconstruct_map, symmetry_mode, ym_coefficients)

STD = HeightFunction.standard()
FC = HeightFunction.flattened_cone(0.5, 1.0, 0.25)
MODELS = [Model("wm", 5), Model("wm", 6), Model("wm", 7), Model("wm", 9), Model("ym", 7), Model("ym", 9)]
IDS = [f"{m.kind}{m.d}" for m in MODELS]


def _wm_profile_arctan(d, t, r):
    # the profile in its original arctan form
    a = math.sqrt(d - 4)
    return 4.0 / r * math.atan(r / (a * t + math.sqrt(a * a * t * t + r * r)))


def _fd6(f, x, step):
    """Sixth-order central first and second derivatives."""
    c1 = [(-1 / 60, -3), (3 / 20, -2), (-3 / 4, -1), (3 / 4, 1), (-3 / 20, 2), (1 / 60, 3)]
    c2 = [(1 / 90, -3), (-3 / 20, -2), (3 / 2, -1), (-49 / 18, 0), (3 / 2, 1), (-3 / 20, 2), (1 / 90, 3)]
    d1 = sum(c * f(x + j * step) for c, j in c1) / step
    d2 = sum(c * f(x + j * step) for c, j in c2) / step**2
    return d1, d2


def test_ym_coefficients_closed_form():
    assert ym_coefficients(5) == (0.625, 0.375)
    al, be = ym_coefficients(6)
    assert al == pytest.approx(1.0531973, abs=1e-7)
    assert be == pytest.approx(0.3550510, abs=1e-7)


def test_ym_alpha_monotone():
    alphas = [ym_coefficients(n)[0] for n in range(5, 51)]
    assert np.all(np.diff(alphas) > 0)


def test_ym_coefficients_domain():
    with pytest.raises(DomainError):
        ym_coefficients(4)


def test_model_validation():
    with pytest.raises(ConfigurationError):
        Model("wm", 4)
    with pytest.raises(ConfigurationError):
        Model("ym", 6)
    with pytest.raises(ConfigurationError):
        Model("skyrme", 5)
    assert Model("wave-maps", 5).kind == "wm"
    assert Model("ym", 7).s == 2 and Model("wm", 5).s == 1


def test_profile_examples():
    assert blowup_profile(Model("wm", 5), 1.0, 1.0).psi == pytest.approx(math.pi / 2, abs=1e-15)
    assert blowup_profile(Model("wm", 5), 1.0, 0.0).psi == pytest.approx(2.0, abs=1e-15)
    assert blowup_profile(Model("ym", 7), 1.0, 1.0).psi == pytest.approx(1.0, abs=1e-14)


def test_profile_singular_point():
    with pytest.raises(SingularityError):
        blowup_profile(Model("wm", 5), 0.0, 0.0)


@pytest.mark.parametrize("d", [5, 6, 7, 9])
def test_wm_profile_matches_arctan_form(d):
    m = Model("wm", d)
    for t, r in [(1.0, 1e-5), (1.0, 0.05), (0.7, 0.3), (1.0, 2.0), (0.2, 5.0)]:
        assert blowup_profile(m, t, r).psi == pytest.approx(_wm_profile_arctan(d, t, r), rel=1e-13)


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_profile_first_derivatives_by_finite_differences(m):
    for t, r in [(1.0, 0.04), (0.8, 0.5), (1.3, 1.7)]:
        p = blowup_profile(m, t, r)
        dt, _ = _fd6(lambda s: blowup_profile(m, s, r).psi, t, 1e-3)
        dr, _ = _fd6(lambda s: blowup_profile(m, t, s).psi, r, 1e-3)
        assert p.psi_t == pytest.approx(dt, abs=1e-9)
        assert p.psi_r == pytest.approx(dr, abs=1e-9)


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_profile_solves_wave_equation(m):
    # -psi_tt + psi_rr + (d-1)/r psi_r + F(r, psi) by finite differences
    for t, r in [(1.0, 0.3), (0.6, 0.9), (1.5, 2.0)]:
        _, ptt = _fd6(lambda s: blowup_profile(m, s, r).psi, t, 2e-3)
        pr, prr = _fd6(lambda s: blowup_profile(m, t, s).psi, r, 2e-3)
        psi = blowup_profile(m, t, r).psi
        F = float(nonlinearity(m, r, psi)[0])
        assert abs(-ptt + prr + (m.d - 1) / r * pr + F) < 1e-7


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_self_similarity(m):
    rng = np.random.default_rng(3)
    for lam, t, r in zip(rng.uniform(0.1, 10, 50), rng.uniform(0.1, 2, 50), rng.uniform(0, 3, 50)):
        lhs = blowup_profile(m, lam * t, lam * r).psi
        assert lhs == pytest.approx(lam ** (-m.s) * blowup_profile(m, t, r).psi, rel=1e-12)


def test_nonlinearity_examples():
    for m in (Model("wm", 5), Model("ym", 7)):
        F, F1, _ = nonlinearity(m, 0.7, 0.0)
        assert F == 0 and F1 == 0
    assert float(nonlinearity(Model("wm", 5), 0.0, 1.0)[0]) == pytest.approx(4 / 3, abs=1e-15)
    assert float(nonlinearity(Model("ym", 7), 1.0, 2.0)[0]) == 12.0


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_nonlinearity_z_derivatives(m):
    for r, z in [(0.002, 1.3), (0.3, 0.9), (1.2, -0.4), (2.0, 1.1)]:
        F, F1, F2 = (float(v) for v in nonlinearity(m, r, z))
        d1, d2 = _fd6(lambda s: float(nonlinearity(m, r, s)[0]), z, 1e-3)
        assert F1 == pytest.approx(d1, abs=1e-9)
        assert F2 == pytest.approx(d2, abs=1e-7)


def test_wm_taylor_switch_is_continuous():
    m = Model("wm", 7)
    z = 1.0
    below = float(nonlinearity(m, 0.999e-2, z)[0])
    above = float(nonlinearity(m, 1.001e-2, z)[0])
    exact = lambda r: -(7 - 3) / 2 * (math.sin(2 * r * z) - 2 * r * z) / r**3
    assert below == pytest.approx(exact(0.999e-2), rel=1e-9)
    assert above == pytest.approx(exact(1.001e-2), rel=1e-9)


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_nonlinearity_scaling_law(m):
    rng = np.random.default_rng(5)
    r, z, lam = rng.uniform(0.01, 2, 200), rng.uniform(-2, 2, 200), rng.uniform(0.2, 5, 200)
    lhs = nonlinearity(m, r, lam ** (-m.s) * z)[0]
    rhs = lam ** (-m.s - 2) * nonlinearity(m, r / lam, z)[0]
    np.testing.assert_allclose(lhs, rhs, rtol=1e-11, atol=1e-13)


def test_potential_examples():
    assert potential(Model("wm", 5), STD, 0.0) == pytest.approx(16.0, rel=1e-14)
    assert potential(Model("ym", 7), STD, 0.0) == pytest.approx(28.8, rel=1e-14)
    assert potential(Model("wm", 5), STD, 100.0) * 100.0**4 == pytest.approx(16.0, rel=1e-3)


@pytest.mark.parametrize("h", [STD, FC], ids=["standard", "cone"])
@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_potential_consistency(m, h):
    rho = np.linspace(0, 3, 300)
    np.testing.assert_allclose(potential(m, h, rho), potential_explicit(m, h, rho), rtol=1e-12, atol=1e-12)


def test_remainder_examples():
    m = Model("ym", 7)
    assert float(nonlinear_remainder_values(m, 0.0, 1.6, 0.1)) == pytest.approx(0.09, abs=1e-14)
    for mm in (Model("wm", 5), m):
        assert nonlinear_remainder(mm, STD, 0.4, 0.0) == 0.0


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_remainder_matches_direct_difference(m):
    r, psi = 0.8, 1.1
    for z in (0.3, -0.5, 1.0):
        F = lambda v: float(nonlinearity(m, r, v)[0])
        direct = F(psi + z) - F(psi) - float(nonlinearity(m, r, psi)[1]) * z
        assert float(nonlinear_remainder_values(m, r, psi, z)) == pytest.approx(direct, rel=1e-12)


def test_remainder_quadratic_limit():
    m = Model("wm", 5)
    rho = 0.6
    psi = blowup_profile(m, 1.0, rho).psi
    F2 = float(nonlinearity(m, rho, psi)[2])
    for z in (1e-7, 1e-8):
        assert nonlinear_remainder(m, STD, rho, z) / z**2 == pytest.approx(F2 / 2, abs=1e-6)


def test_symmetry_mode_examples():
    assert symmetry_mode(Model("wm", 5), STD, 0.0)[0] == pytest.approx(-2.0, abs=1e-15)
    assert symmetry_mode(Model("ym", 7), STD, 0.0)[0] == pytest.approx(-3.2, abs=1e-14)


@pytest.mark.parametrize("h", [STD, FC], ids=["standard", "cone"])
@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_symmetry_mode_by_finite_differences(m, h):
    def f1(rho):
        t = -h(rho)[0]
        return _fd6(lambda s: blowup_profile(m, s, rho).psi, t, 1e-3)[0]

    for rho in (0.2, 0.9, 1.3):
        got, second = symmetry_mode(m, h, rho)
        assert got == pytest.approx(f1(rho), abs=1e-8)
        df1 = _fd6(f1, rho, 1e-2)[0]
        c = rho * h(rho)[1] - h(rho)[0]
        assert second == pytest.approx(((m.s + 1) * got + rho * df1) / c, abs=1e-6)


def test_reconstruct_wave_map():
    m = Model("wm", 5)
    np.testing.assert_array_equal(reconstruct_map(m, 0.0, [0.1, 0.2, 0.3]), [0, 0, 0, 1])
    rng = np.random.default_rng(7)
    for _ in range(1000):
        x = rng.uniform(-1, 1, 3)
        psi = rng.uniform(-3, 3) / max(np.linalg.norm(x), 1.0)
        u = reconstruct_map(m, psi, x)
        assert abs(np.linalg.norm(u) - 1.0) < 1e-14
    with pytest.raises(DomainError):
        reconstruct_map(m, 10.0, [1.0, 0.0, 0.0])


def test_reconstruct_yang_mills_antisymmetric():
    A = reconstruct_map(Model("ym", 7), 0.7, [0.1, -0.4, 0.3, 0.2, 0.5])
    np.testing.assert_array_equal(A, -np.swapaxes(A, 1, 2))
    assert A[2, 0, 1] == pytest.approx(0.7 * 0.1)
    assert not np.any(A[0])
