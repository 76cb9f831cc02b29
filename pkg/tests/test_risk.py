import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from src.spatialrisk.errors import (
    DegenerateModelError,
    IntegrabilityError,
    InvalidThresholdError,
    ParameterError,
)
from src.spatialrisk.extremal import (
    BrownResnick,
    CorrelationFamily,
    CorrelationKind,
    GeometricGaussian,
    Independence,
    PerfectDependence,
    Schlather,
    Semivariogram,
    Smith,
    Tube,
    extremal_coefficient,
)
from src.spatialrisk.geometry import ConvexPolygon, Region, Shape, distance_density
from src.spatialrisk.risk import (
    GevParams,
    Provenance,
    RiskKind,
    RiskQuery,
    clt_gaussian_approx,
    clt_quantile_band,
    gev_to_frechet_threshold,
    homogeneity_constants_var,
    homogeneity_constants_variance,
    limiting_risk_measure,
    r1_expectation,
    r2_variance_1d,
    r2_variance_2d,
    risk_curve,
    sigma_squared,
    variance_1d,
)

UNIT_DISK = Region(Shape.DISK, 1.0)
UNIT_SQUARE = Region(Shape.SQUARE, 1.0)
CAUCHY = CorrelationFamily(CorrelationKind.CAUCHY, 1.0, 0.5)
ZOO = [
    Smith(1.0),
    Schlather(CAUCHY),
    GeometricGaussian(1.0, CAUCHY),
    BrownResnick(Semivariogram(1.0, 1.0)),
    Tube(1.0),
    PerfectDependence(),
    Independence(),
]


def smith_theta(h):
    return 2 * norm.cdf(h / 2)


def tube_theta(h):
    return extremal_coefficient(Tube(1.0), h)


def sigma_squared_oracle(theta, upper, u=1.0):
    value, _ = quad(lambda h: 2 * math.pi * h * (math.exp(-theta(h) / u) - math.exp(-2 / u)), 0.0, upper,
                    epsabs=1e-13, epsrel=1e-12, limit=500)
    return value


class TestExpectation:
    def test_closed_form(self):
        assert r1_expectation(1.0) == pytest.approx(0.6321206, abs=1e-7)
        assert r1_expectation(0.5) == pytest.approx(0.8646647, abs=1e-7)

    def test_rejects_non_positive_threshold(self):
        with pytest.raises(ParameterError):
            r1_expectation(0.0)

    def test_curve_is_constant(self):
        curve = risk_curve(RiskQuery(Tube(1.0), UNIT_DISK, 1.0, RiskKind.EXPECTATION), [1.0, 2.0, 5.0])
        assert curve.values == [r1_expectation(1.0)] * 3
        assert curve.limit == r1_expectation(1.0)


class TestVariance:
    @pytest.mark.parametrize("region", [UNIT_DISK, UNIT_SQUARE, Region(Shape.DISK, 3.0)])
    @pytest.mark.parametrize("u", [0.5, 1.0, 4.0])
    def test_perfect_dependence_is_exact(self, region, u):
        expected = math.exp(-1 / u) - math.exp(-2 / u)
        for lambda_ in (0.1, 1.0, 50.0):
            assert r2_variance_1d(PerfectDependence(), region, lambda_, u) == pytest.approx(expected, abs=1e-12)
        assert r2_variance_2d(PerfectDependence(), region, 2.0, u) == pytest.approx(expected, abs=1e-12)
        assert r2_variance_2d(PerfectDependence(), UNIT_SQUARE.as_polygon(), 1.0, u) == pytest.approx(expected, abs=1e-12)

    def test_perfect_dependence_value(self):
        assert r2_variance_1d(PerfectDependence(), UNIT_DISK, 1.0, 1.0) == pytest.approx(0.2325442, abs=1e-7)

    def test_independence_is_zero(self):
        assert r2_variance_1d(Independence(), UNIT_SQUARE, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_against_direct_quadrature(self):
        lambda_ = 2.0
        expected, _ = quad(lambda h: distance_density(UNIT_DISK, h)
                           * (math.exp(-smith_theta(lambda_ * h)) - math.exp(-2)), 0.0, 2.0, epsabs=1e-12, limit=200)
        integral = variance_1d(Smith(1.0), UNIT_DISK, lambda_, 1.0)
        assert integral.value == pytest.approx(expected, rel=1e-7)
        assert integral.error <= 1e-9

    @pytest.mark.parametrize("lambda_", [0.5, 2.0])
    @pytest.mark.parametrize("region", [UNIT_DISK, UNIT_SQUARE])
    @pytest.mark.parametrize("model", [
        Smith(1.0),
        Tube(1.0),
        Schlather(CAUCHY),
        GeometricGaussian(1.0, CAUCHY),
        BrownResnick(Semivariogram(1.0, 1.0)),
    ])
    def test_one_and_two_dimensional_paths_agree(self, model, region, lambda_):
        assert r2_variance_1d(model, region, lambda_, 1.0) == pytest.approx(
            r2_variance_2d(model, region, lambda_, 1.0), abs=1e-6)

    def test_anisotropic_smith_equals_identity_on_the_stretched_region(self):
        # Σ = diag(4, 1) on the unit square is Σ = I on [-1/4, 1/4] x [-1/2, 1/2]
        rectangle = ConvexPolygon(((-0.25, -0.5), (0.25, -0.5), (0.25, 0.5), (-0.25, 0.5)))
        anisotropic = r2_variance_2d(Smith([[4.0, 0.0], [0.0, 1.0]]), UNIT_SQUARE, 1.0, 1.0)
        assert anisotropic == pytest.approx(r2_variance_2d(Smith(1.0), rectangle, 1.0, 1.0), abs=1e-6)

    def test_anisotropic_curves_use_the_two_dimensional_path(self):
        query = RiskQuery(Smith([[4.0, 0.0], [0.0, 1.0]]), UNIT_SQUARE, 1.0)
        assert risk_curve(query, [2.0]).provenance is Provenance.QUADRATURE_2D

    def test_smith_curve_decreases_to_zero(self):
        curve = risk_curve(RiskQuery(Smith(1.0), UNIT_DISK, 1.0), [float(k) for k in range(1, 31)])
        assert curve.provenance is Provenance.QUADRATURE_1D
        assert all(b <= a + 1e-10 for a, b in zip(curve.values, curve.values[1:]))
        assert curve.values[-1] < 1e-3
        assert curve.limit == 0.0

    def test_schlather_curve_decreases_to_its_limit(self):
        family = CorrelationFamily(CorrelationKind.POWERED_EXPONENTIAL, 1.0, 0.5)
        curve = risk_curve(RiskQuery(Schlather(family), UNIT_SQUARE, 1.0), [1.0, 2.0, 5.0, 10.0, 30.0])
        limit = math.exp(-(1 + math.sqrt(0.5))) - math.exp(-2)
        assert curve.limit == pytest.approx(limit, abs=1e-12)
        assert all(b <= a + 1e-10 for a, b in zip(curve.values, curve.values[1:]))
        assert all(value > limit for value in curve.values)

    def test_non_mixing_models_converge_slower(self):
        def excess_ratio(model):
            limit = limiting_risk_measure(model, 1.0)
            return (r2_variance_1d(model, UNIT_DISK, 10.0, 1.0) - limit) / (r2_variance_1d(model, UNIT_DISK, 1.0, 1.0) - limit)

        tube, smith = excess_ratio(Tube(1.0)), excess_ratio(Smith(1.0))
        assert tube < smith
        for model in (Schlather(CAUCHY), Schlather(CorrelationFamily(CorrelationKind.POWERED_EXPONENTIAL, 1.0, 0.5)),
                      GeometricGaussian(1.0, CAUCHY)):
            assert smith < excess_ratio(model)

    @pytest.mark.parametrize("model", [Smith(1.0), Tube(1.0), Schlather(CAUCHY)])
    def test_inner_square_carries_more_risk_than_the_disk(self, model):
        for lambda_ in (1.0, 2.0, 5.0, 10.0, 20.0):
            assert r2_variance_1d(model, UNIT_SQUARE, lambda_, 1.0) >= r2_variance_1d(model, UNIT_DISK, lambda_, 1.0)

    def test_same_values_whatever_the_worker_count(self):
        query = RiskQuery(Tube(1.0), UNIT_DISK, 1.0)
        lambdas = [1.0, 2.0, 3.0, 4.0, 5.0]
        assert risk_curve(query, lambdas, workers=1).values == risk_curve(query, lambdas, workers=3).values

    def test_shrinking_tubes_leave_the_variance_unchanged(self):
        differences = [abs(r2_variance_1d(Tube(r_b), UNIT_DISK, 3.0, 1.0) - r2_variance_1d(Tube(r_b), UNIT_DISK, 1.0, 1.0))
                       for r_b in (1.0, 0.1, 0.01)]
        assert differences[0] > differences[1] > differences[2]
        assert differences[2] < 1e-3

    def test_invalid_grids(self):
        query = RiskQuery(Smith(1.0), UNIT_DISK, 1.0)
        with pytest.raises(ParameterError):
            risk_curve(query, [])
        with pytest.raises(ParameterError):
            risk_curve(query, [2.0, 1.0])
        with pytest.raises(ParameterError):
            risk_curve(query, [0.0, 1.0])


class TestLimit:
    def test_schlather(self):
        expected = math.exp(-(1 + math.sqrt(0.5))) - math.exp(-2)
        assert limiting_risk_measure(Schlather(CAUCHY), 1.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.0460546, abs=1e-7)

    def test_geometric_gaussian(self):
        expected = math.exp(-2 * norm.cdf(math.sqrt(0.5))) - math.exp(-2)
        assert limiting_risk_measure(GeometricGaussian(1.0, CAUCHY), 1.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.0833, abs=1e-3)

    @pytest.mark.parametrize("model", ZOO)
    def test_zero_iff_mixing(self, model):
        assert (limiting_risk_measure(model, 1.0) == 0.0) == (model.theta_limit() == 2.0)


class TestSigmaSquared:
    def test_smith(self):
        assert sigma_squared(Smith(1.0), 1.0) == pytest.approx(sigma_squared_oracle(smith_theta, math.inf), rel=1e-7)

    def test_tube(self):
        assert sigma_squared(Tube(1.0), 1.0) == pytest.approx(sigma_squared_oracle(tube_theta, 2.0), rel=1e-7)

    def test_brown_resnick(self):
        def theta(h):
            return 2 * norm.cdf(math.sqrt(h / 2))

        assert sigma_squared(BrownResnick(Semivariogram(1.0, 1.0)), 1.0) == pytest.approx(
            sigma_squared_oracle(theta, math.inf), rel=1e-6)

    def test_anisotropic_smith_scales_with_the_determinant(self):
        assert sigma_squared(Smith([[4.0, 0.0], [0.0, 1.0]]), 2.0) == pytest.approx(2 * sigma_squared(Smith(1.0), 2.0))

    def test_diverges_for_non_mixing_models(self):
        with pytest.raises(IntegrabilityError):
            sigma_squared(Schlather(CAUCHY), 1.0)
        with pytest.raises(IntegrabilityError):
            sigma_squared(PerfectDependence(), 1.0)

    def test_independence_is_degenerate(self):
        assert sigma_squared(Independence(), 1.0) == 0.0
        with pytest.raises(DegenerateModelError):
            homogeneity_constants_variance(Independence(), UNIT_DISK, 1.0)

    @pytest.mark.parametrize("model, lambda_", [(Tube(1.0), 50.0), (Smith(1.0), 200.0)])
    def test_variance_decays_at_order_two(self, model, lambda_):
        scaled = lambda_ ** 2 * UNIT_DISK.area * r2_variance_1d(model, UNIT_DISK, lambda_, 1.0)
        assert scaled == pytest.approx(sigma_squared(model, 1.0), rel=0.02)


class TestHomogeneityConstants:
    def test_variance(self):
        k1, k2, order = homogeneity_constants_variance(Tube(1.0), UNIT_DISK, 1.0)
        assert (k1, order) == (0.0, -2.0)
        assert k2 == pytest.approx(sigma_squared(Tube(1.0), 1.0) / math.pi)
        assert homogeneity_constants_variance(Smith(1.0), Region(Shape.SQUARE, 2.0), 1.0).k2 == pytest.approx(
            sigma_squared(Smith(1.0), 1.0) / 4)

    def test_var(self):
        k1, k2, order = homogeneity_constants_var(Smith(1.0), UNIT_SQUARE, 1.0, 0.9)
        assert k1 == pytest.approx(0.6321206, abs=1e-7)
        assert k2 == pytest.approx(math.sqrt(sigma_squared(Smith(1.0), 1.0)) * 1.2815516, rel=1e-7)
        assert order == -1.0

    def test_var_below_the_median(self):
        assert homogeneity_constants_var(Smith(1.0), UNIT_SQUARE, 1.0, 0.1).k2 < 0

    def test_var_rejects_the_median(self):
        with pytest.raises(ParameterError):
            homogeneity_constants_var(Smith(1.0), UNIT_SQUARE, 1.0, 0.5)


class TestGaussianApproximation:
    def test_value(self):
        sigma = math.sqrt(sigma_squared(Tube(1.0), 1.0))
        expected = r1_expectation(1.0) + sigma * norm.ppf(0.9) / (20 * math.sqrt(math.pi))
        assert clt_gaussian_approx(Tube(1.0), UNIT_DISK, 20.0, 1.0, 0.9) == pytest.approx(expected, rel=1e-10)

    def test_median_and_large_regions(self):
        assert clt_gaussian_approx(Schlather(CAUCHY), UNIT_DISK, 2.0, 1.0, 0.5) == r1_expectation(1.0)
        assert clt_gaussian_approx(Tube(1.0), UNIT_DISK, 1e8, 1.0, 0.9) == pytest.approx(r1_expectation(1.0))

    def test_band_is_centred_on_the_mean(self):
        low, high = clt_quantile_band(Tube(1.0), UNIT_DISK, 10.0, 1.0)
        assert (low + high) / 2 == pytest.approx(r1_expectation(1.0))
        assert high == pytest.approx(clt_gaussian_approx(Tube(1.0), UNIT_DISK, 10.0, 1.0, 0.975))

    def test_var_curve_without_simulation_is_flagged(self):
        curve = risk_curve(RiskQuery(Tube(1.0), UNIT_DISK, 1.0, RiskKind.VAR, 0.9), [10.0, 20.0])
        assert curve.notes
        assert curve.provenance is Provenance.GAUSSIAN_APPROXIMATION
        assert all(math.isnan(err) for err in curve.err_estimate)
        assert curve.values[0] > curve.values[1] > r1_expectation(1.0)

    def test_var_query_needs_a_level(self):
        with pytest.raises(ParameterError):
            RiskQuery(Tube(1.0), UNIT_DISK, 1.0, RiskKind.VAR)


class TestGevThreshold:
    def test_examples(self):
        assert gev_to_frechet_threshold(GevParams(0.0, 1.0, 0.0), 0.0) == 1.0
        assert gev_to_frechet_threshold(GevParams(0.0, 1.0, 1.0), 1.0) == pytest.approx(2.0, abs=1e-15)

    def test_outside_the_support(self):
        with pytest.raises(InvalidThresholdError):
            gev_to_frechet_threshold(GevParams(0.0, 1.0, -1.0), 2.0)

    @pytest.mark.parametrize("mu, sigma, u1", [(0.0, 1.0, 0.5), (10.0, 2.0, 13.0), (-1.0, 0.5, -2.0)])
    def test_continuous_at_zero_shape(self, mu, sigma, u1):
        at_zero = gev_to_frechet_threshold(GevParams(mu, sigma, 0.0), u1)
        assert abs(gev_to_frechet_threshold(GevParams(mu, sigma, 1e-9), u1) - at_zero) < 1e-7

    def test_rejects_non_positive_scale(self):
        with pytest.raises(ParameterError):
            GevParams(0.0, 0.0, 0.1)

    def test_reduces_to_frechet_margins(self):
        params = GevParams(1.0, 2.0, 0.3)
        u1 = 4.0
        u = gev_to_frechet_threshold(params, u1)
        gev_cdf = math.exp(-(1 + params.xi * (u1 - params.mu) / params.sigma) ** (-1 / params.xi))
        assert math.exp(-1 / u) == pytest.approx(gev_cdf, rel=1e-12)
        assert np.isfinite(u)
