import math

import numpy as np
import pytest
from scipy.special import kv
from scipy.stats import norm

from src.spatialrisk.errors import ParameterError
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
    correlation,
    disc_intersection_area,
    extremal_coefficient,
    extremal_coefficient_limit,
    is_mixing,
    mixing_diagnostic,
    model_from_dict,
    pairwise_extremal_coefficient,
    semivariogram,
    tube_bivariate_cdf,
)

CAUCHY = CorrelationFamily(CorrelationKind.CAUCHY, 1.0, 0.5)


class TestCorrelation:
    def test_whittle_matern_half_is_exponential(self):
        family = CorrelationFamily(CorrelationKind.WHITTLE_MATERN, 1.0, 0.5)
        assert correlation(family, 2.0) == pytest.approx(math.exp(-2), rel=1e-12)

    def test_whittle_matern_against_bessel(self):
        family = CorrelationFamily(CorrelationKind.WHITTLE_MATERN, 2.0, 1.5)
        h = np.array([0.1, 1.0, 3.0, 10.0])
        x = h / 2.0
        expected = 2 ** (1 - 1.5) / math.gamma(1.5) * x ** 1.5 * kv(1.5, x)
        assert correlation(family, h) == pytest.approx(expected, rel=1e-10)

    def test_powered_exponential(self):
        family = CorrelationFamily(CorrelationKind.POWERED_EXPONENTIAL, 1.0, 1.0)
        assert correlation(family, 1.0) == pytest.approx(math.exp(-1), rel=1e-12)

    def test_cauchy(self):
        assert correlation(CAUCHY, 1.0) == pytest.approx(2 ** -0.5, rel=1e-12)

    @pytest.mark.parametrize("kind", list(CorrelationKind))
    def test_one_at_origin_and_vanishing_far_away(self, kind):
        family = CorrelationFamily(kind, 1.0, 0.5)
        assert correlation(family, 0.0) == pytest.approx(1.0)
        assert correlation(family, 1e4) < 1e-2

    def test_rejects_bad_parameters(self):
        with pytest.raises(ParameterError):
            CorrelationFamily(CorrelationKind.CAUCHY, 0.0, 0.5)
        with pytest.raises(ParameterError):
            CorrelationFamily(CorrelationKind.POWERED_EXPONENTIAL, 1.0, 2.0)

    def test_rejects_negative_distances(self):
        with pytest.raises(ParameterError):
            correlation(CAUCHY, -1.0)

    def test_semivariogram(self):
        assert semivariogram(Semivariogram(2.0, 1.5), 4.0) == pytest.approx(16.0)
        with pytest.raises(ParameterError):
            Semivariogram(1.0, 2.5)


class TestExtremalCoefficient:
    def test_smith_identity(self):
        h = np.array([0.0, 0.5, 1.0, 3.0])
        assert extremal_coefficient(Smith(1.0), h) == pytest.approx(2 * norm.cdf(h / 2), rel=1e-12)

    def test_smith_anisotropic_pair(self):
        model = Smith([[4.0, 0.0], [0.0, 1.0]])
        assert not model.isotropic
        theta = pairwise_extremal_coefficient(model, (0.0, 0.0), (2.0, 0.0))
        assert theta == pytest.approx(2 * norm.cdf(0.5), rel=1e-12)
        assert theta == pytest.approx(1.3829, abs=1e-4)

    def test_smith_anisotropic_has_no_isotropic_form(self):
        with pytest.raises(ParameterError):
            extremal_coefficient(Smith([[4.0, 0.0], [0.0, 1.0]]), 1.0)

    def test_smith_rejects_non_positive_covariance(self):
        with pytest.raises(ParameterError):
            Smith([[1.0, 2.0], [2.0, 1.0]])

    def test_schlather(self):
        model = Schlather(CAUCHY)
        assert extremal_coefficient(model, 1.0) == pytest.approx(1 + math.sqrt((1 - 2 ** -0.5) / 2))
        assert extremal_coefficient_limit(model) == pytest.approx(1 + math.sqrt(0.5))

    def test_geometric_gaussian_limit(self):
        model = GeometricGaussian(1.0, CAUCHY)
        assert extremal_coefficient_limit(model) == pytest.approx(2 * norm.cdf(math.sqrt(0.5)), rel=1e-12)
        assert extremal_coefficient(model, 1e6) == pytest.approx(extremal_coefficient_limit(model), abs=1e-3)

    def test_brown_resnick(self):
        model = BrownResnick(Semivariogram(1.0, 1.0))
        assert extremal_coefficient(model, 2.0) == pytest.approx(2 * norm.cdf(1.0), rel=1e-12)

    def test_tube(self):
        model = Tube(1.0)
        assert extremal_coefficient(model, 0.0) == pytest.approx(1.0)
        assert extremal_coefficient(model, 1.0) == pytest.approx(1.608998, abs=1e-6)
        assert extremal_coefficient(model, 2.5) == 2.0

    def test_degenerate_fixtures(self):
        assert extremal_coefficient(PerfectDependence(), 10.0) == 1.0
        assert extremal_coefficient(Independence(), 0.0) == 1.0
        assert extremal_coefficient(Independence(), 0.1) == 2.0

    @pytest.mark.parametrize("model", [
        Smith(1.0), Schlather(CAUCHY), GeometricGaussian(2.0, CAUCHY), BrownResnick(Semivariogram(1.0, 1.5)), Tube(0.5),
    ])
    def test_monotone_between_one_and_two(self, model):
        theta = extremal_coefficient(model, np.linspace(0.0, 20.0, 401))
        assert np.all(theta >= 1.0 - 1e-12) and np.all(theta <= 2.0 + 1e-12)
        assert np.all(np.diff(theta) >= -1e-12)

    def test_mixing(self):
        assert is_mixing(Smith(1.0))
        assert is_mixing(Tube(1.0))
        assert not is_mixing(Schlather(CAUCHY))
        assert not is_mixing(GeometricGaussian(1.0, CAUCHY))
        assert mixing_diagnostic(Smith(1.0), 100.0) < 1e-12


class TestTube:
    def test_intersection_area(self):
        assert disc_intersection_area(1.0, 1.0) == pytest.approx(1.228370, abs=1e-6)
        assert disc_intersection_area(0.0, 1.0) == pytest.approx(math.pi)
        assert disc_intersection_area(3.0, 1.0) == 0.0

    def test_bivariate_cdf(self):
        assert tube_bivariate_cdf(1.0, 5.0, 1.0, 1.0) == pytest.approx(math.exp(-2))
        assert tube_bivariate_cdf(1.0, 0.0, 1.0, 1.0) == pytest.approx(math.exp(-1))
        assert tube_bivariate_cdf(1.0, 1.0, 2.0, 1e9) == pytest.approx(math.exp(-0.5), rel=1e-6)

    def test_bivariate_cdf_on_the_diagonal(self):
        theta = extremal_coefficient(Tube(1.0), 1.0)
        assert tube_bivariate_cdf(1.0, 1.0, 2.0, 2.0) == pytest.approx(math.exp(-theta / 2))

    def test_bivariate_cdf_rejects_non_positive_levels(self):
        with pytest.raises(ParameterError):
            tube_bivariate_cdf(1.0, 1.0, 0.0, 1.0)


class TestModelFromDict:
    def test_builds_every_model(self):
        for model in (Smith(2.0), Schlather(CAUCHY), GeometricGaussian(1.0, CAUCHY),
                      BrownResnick(Semivariogram(1.0, 1.0)), Tube(0.5), PerfectDependence(), Independence()):
            assert model_from_dict(model.to_dict()) == model

    def test_unknown_model(self):
        with pytest.raises(ParameterError):
            model_from_dict({"model": "gaussian"})

    def test_missing_parameter(self):
        with pytest.raises(ParameterError):
            model_from_dict({"model": "schlather"})
