import math

import pytest
from scipy.integrate import quad

from src.spatialrisk.errors import QuadratureError
from src.spatialrisk.quadrature import TOLERANCE_1D, integrate, integrate_polar, panels


def test_panels_are_split_at_interior_points():
    assert panels(0.0, 3.0, [1.0, 2.0, 5.0, -1.0]) == [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]
    assert panels(1.0, 1.0) == []


def test_integrate():
    integral = integrate(math.sin, 0.0, math.pi)
    assert integral.value == pytest.approx(2.0, abs=1e-12)
    assert integral.error <= 1e-9
    assert integral.evaluations > 0


def test_error_is_the_sum_of_the_panel_estimates():
    integral = integrate(math.exp, 0.0, 1.0, [0.5])
    epsabs = TOLERANCE_1D / 20
    panel_errors = [quad(math.exp, lo, hi, epsabs=epsabs, epsrel=1e-10, limit=200)[1] for lo, hi in [(0.0, 0.5), (0.5, 1.0)]]
    assert integral.error == pytest.approx(math.fsum(panel_errors), rel=1e-12)


def test_breakpoints_handle_kinks():
    integral = integrate(lambda x: abs(x - 0.3), 0.0, 1.0, [0.3])
    assert integral.value == pytest.approx(0.3 ** 2 / 2 + 0.7 ** 2 / 2, abs=1e-14)


def test_empty_interval():
    assert integrate(math.exp, 2.0, 2.0).value == 0.0


def test_non_finite_integrand_is_reported():
    with pytest.raises(QuadratureError):
        integrate(lambda x: math.nan, 0.0, 1.0)


def test_polar_disk_area():
    integral = integrate_polar(lambda r, phi: 1.0, [0.0, 2 * math.pi], lambda phi: (2.0, []))
    assert integral.value == pytest.approx(4 * math.pi, abs=1e-10)


def test_polar_gaussian_mass():
    integral = integrate_polar(lambda r, phi: math.exp(-r * r / 2) / (2 * math.pi), [0.0, math.pi, 2 * math.pi],
                               lambda phi: (20.0, [1.0, 4.0]))
    assert integral.value == pytest.approx(1.0, abs=1e-9)
