import math

import numpy as np
import pytest
from scipy.integrate import quad

from blowlab.coords import (CoordChart, Event, HeightFunction, foliation_metrics, from_physical,
                            height_eval, image_slopes, light_cone_radius, to_physical,
                            transition_scale, validate_height)
from blowlab.errors import ConfigurationError, DomainError

STD = HeightFunction.standard()
HYP = HeightFunction.hyperboloidal(1.0, 1.0)
FC = HeightFunction.flattened_cone(0.5, 1.0, 0.25)


def _cone_by_convolution(rho, kb=0.5, rb=1.0, eps=0.25):
    """Mollified cone profile as a direct convolution integral."""
    phi = lambda y: math.exp(-1.0 / (1.0 - y * y)) if abs(y) < 1 else 0.0
    norm = quad(phi, -1, 1, epsabs=1e-14, epsrel=1e-14)[0]
    kink = lambda r: max(kb * (r - rb), 0.0) - 1.0
    return quad(lambda y: kink(rho - eps * y) * phi(y), -1, 1, points=[(rho - rb) / eps],
                epsabs=1e-14, epsrel=1e-14)[0] / norm


def test_height_eval_standard():
    assert height_eval(STD, 0.5) == (-1.0, 0.0, 0.0, 1.0, 1.0)


def test_height_eval_hyperboloidal_closed_form():
    out = height_eval(HYP, 1.0)
    r2 = math.sqrt(2.0)
    expect = (r2 - 2, 1 / r2, 2**-1.5, 1 * (1 / r2) - (r2 - 2), 0.5)
    np.testing.assert_allclose(out, expect, rtol=0, atol=1e-15)


def test_height_eval_cone_plateau():
    assert height_eval(FC, 0.5) == (-1.0, 0.0, 0.0, 1.0, 1.0)


def test_height_eval_negative_radius():
    with pytest.raises(DomainError):
        height_eval(STD, -0.1)


@pytest.mark.parametrize("rho", [0.76, 0.9, 1.0, 1.13, 1.24])
def test_cone_band_matches_convolution(rho):
    assert FC(rho)[0] == pytest.approx(_cone_by_convolution(rho), abs=1e-12)


@pytest.mark.parametrize("rho", [0.8, 1.0, 1.2])
def test_cone_derivatives_match_finite_differences(rho):
    # fourth-order central stencil
    step = 2.5e-4
    vals = [FC(rho + j * step) for j in (-2, -1, 1, 2)]

    def fd(i):
        return (vals[0][i] - 8 * vals[1][i] + 8 * vals[2][i] - vals[3][i]) / (12 * step)

    assert FC(rho)[1] == pytest.approx(fd(0), abs=1e-9)
    assert FC(rho)[2] == pytest.approx(fd(1), abs=1e-9)


def test_cone_segment_closed_form():
    assert FC(3.0)[0] == pytest.approx(0.0, abs=1e-15)
    assert FC(2.0)[1] == 0.5


def test_light_cone_radii():
    assert light_cone_radius(STD) == 1.0
    assert light_cone_radius(HYP) == pytest.approx(0.75, abs=1e-12)
    r0 = light_cone_radius(FC)
    assert 0.75 < r0 < 1.25
    assert abs(FC(r0)[0] + r0) < 1e-13


def test_light_cone_unbracketed():
    with pytest.raises(ConfigurationError):
        light_cone_radius(STD, rho_max=0.5)


def test_image_slopes():
    assert image_slopes(STD, 2.0) == (0.0, -0.5)
    k, kr = image_slopes(FC, 3.0)
    assert k == 0.5 and kr == pytest.approx(0.0, abs=1e-15)
    k, kr = image_slopes(HYP, 2.0)
    assert k == 1.0 and kr == pytest.approx((math.sqrt(5) - 2) / 2, abs=1e-15)


def test_validate_height_reports():
    std = validate_height(STD)
    assert std.checks["slope_range"] and std.checks["convexity"]
    assert std.R_h4 is None
    assert validate_height(STD, kappa=-0.5).R_h4 == pytest.approx(2.0)
    fc = validate_height(FC)
    assert fc.passed
    assert fc.R_h4 == pytest.approx(3.0, abs=1e-10)
    hyp = validate_height(HYP)
    assert not hyp.checks["h1_plateau"]
    assert hyp.checks["h2_gradient"] and hyp.checks["h3_convexity"]


def test_to_physical_examples():
    chart = CoordChart(STD)
    assert to_physical(chart, 0.0, 0.0) == Event(0.0, 0.0)
    e = to_physical(chart, math.log(2), 0.4)
    assert (e.t, e.r) == pytest.approx((0.5, 0.2), abs=1e-15)
    e = to_physical(CoordChart(HYP, 1.0, 1.0), 0.0, 1.0)
    assert (e.t, e.r) == pytest.approx((math.sqrt(2) - 1, 1.0), abs=1e-15)


def test_to_physical_outside_radius():
    with pytest.raises(DomainError):
        to_physical(CoordChart(STD), 0.0, 1.5)


def test_from_physical_examples():
    chart = CoordChart(STD)
    assert from_physical(chart, Event(0.5, 0.0)) == pytest.approx((math.log(2), 0.0), abs=1e-13)
    assert from_physical(chart, Event(0.0, 0.3)) == pytest.approx((0.0, 0.3), abs=1e-13)


def test_from_physical_rejects_outside_events():
    chart = CoordChart(STD)
    with pytest.raises(DomainError):
        from_physical(chart, Event(1.5, 0.1))
    with pytest.raises(DomainError):
        from_physical(chart, Event(0.5, 0.9))


@pytest.mark.parametrize("h", [STD, HYP, FC], ids=["standard", "hyperboloidal", "cone"])
def test_round_trip_random_points(h):
    chart = CoordChart(h, 1.3)
    rng = np.random.default_rng(1)
    for tau, rho in zip(rng.uniform(0, 4, 100), rng.uniform(0, chart.R, 100)):
        e = to_physical(chart, tau, rho)
        back = from_physical(chart, e)
        assert back[0] == pytest.approx(tau, abs=1e-12)
        assert back[1] == pytest.approx(rho, rel=1e-12, abs=1e-12)


def test_transition_scale_examples():
    assert transition_scale(FC, FC, 0.9) == 1.0
    assert transition_scale(STD, HYP, 1.0) == pytest.approx(2 - math.sqrt(2), abs=1e-13)
    assert transition_scale(STD, FC, 0.5) == pytest.approx(1.0, abs=1e-13)


def test_foliation_metrics():
    assert foliation_metrics(STD, 0.3, 5) == (1.0, 1.0, 0.0)
    det, n0, nr = foliation_metrics(HYP, 1.0, 5)
    assert (det, n0, nr) == pytest.approx((0.5, math.sqrt(2), 1.0), abs=1e-14)
    det2, _, _ = foliation_metrics(HYP, 1.0, 5, tau=math.log(2))
    assert det2 == pytest.approx(det * 2.0**-10, rel=1e-14)


def test_chart_inside_light_cone_rejected():
    with pytest.raises(ConfigurationError):
        CoordChart(STD, 1.0, 0.9)


def test_extended_precision_heights():
    rho = np.linspace(0, 1, 7, dtype=np.longdouble)
    h0, h1, h2 = HYP(rho)
    assert h0.dtype == np.longdouble
    exact = np.sqrt(np.longdouble(1) + rho**2) - 2
    assert np.max(np.abs(h0 - exact)) < 1e-17
