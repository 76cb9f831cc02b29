import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from .errors import (
    DegenerateModelError,
    IntegrabilityError,
    InternalConsistencyError,
    InvalidThresholdError,
    ParameterError,
    QuadratureError,
)
from .extremal import ExtremalModel, Independence, Smith, Tube
from .geometry import AnyRegion, DifferenceDomain, Region, Shape, covariogram, distance_density
from .quadrature import TOLERANCE_1D, TOLERANCE_2D, Integral, integrate, integrate_polar
from .simulation import GridSpec, MonteCarloSettings, quantile_with_error, simulate_losses
from .workers import parallel_map

"""Spatial risk measures of the excess indicator field 1{Z(x) > u} over homothetic regions λA.

Variances are computed relative to their limit: with g(v) = e^{-Θ(v)/u} - e^{-2/u} and g∞ its value at
infinite distance, R2(λA) = g∞ + ∫ f(h) [g(λh) - g∞] dh, which is exact for constant Θ and keeps the
integrand small when λ is large.
"""

LENGTH_MULTIPLES = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
VARIANCE_FLOOR = -1e-12
TAIL_TOLERANCE = 1e-12
XI_ZERO = 1e-12


class RiskKind(Enum):
    EXPECTATION = "expectation"
    VARIANCE = "variance"
    VAR = "var"


class Provenance(Enum):
    QUADRATURE_1D = "quadrature-1d"
    QUADRATURE_2D = "quadrature-2d"
    MONTE_CARLO = "monte-carlo"
    GAUSSIAN_APPROXIMATION = "gaussian-approximation"


def check_threshold(u: float) -> None:
    if not (u > 0 and math.isfinite(u)):
        msg = f"threshold u must be a positive real, got {u}"
        raise ParameterError(msg)


def check_level(alpha: float) -> None:
    if not 0 < alpha < 1:
        msg = f"quantile level alpha must lie in (0, 1), got {alpha}"
        raise ParameterError(msg)


@dataclass(frozen=True)
class RiskQuery:
    model: ExtremalModel
    region: AnyRegion
    u: float
    kind: RiskKind = RiskKind.VARIANCE
    alpha: float | None = None

    def __post_init__(self) -> None:
        check_threshold(self.u)
        if self.kind is RiskKind.VAR:
            if self.alpha is None:
                msg = "a VaR query needs a quantile level alpha"
                raise ParameterError(msg)
            check_level(self.alpha)

    def __str__(self) -> str:
        level = f" alpha={self.alpha}" if self.kind is RiskKind.VAR else ""
        return f"{self.kind.value}{level} of {self.model} on {self.region} at u={self.u}"


@dataclass(frozen=True)
class GevParams:
    mu: float
    sigma: float
    xi: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            msg = f"GEV scale sigma must be positive, got {self.sigma}"
            raise ParameterError(msg)


@dataclass
class RiskCurve:
    """err_estimate holds, per λ, the summed QUADPACK error estimate for quadrature curves, the standard
    error for Monte-Carlo curves, 0 for closed forms and NaN for the Gaussian approximation, whose error
    is not quantified."""

    lambdas: list[float]
    values: list[float]
    limit: float | None
    provenance: Provenance
    err_estimate: list[float]
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not len(self.lambdas) == len(self.values) == len(self.err_estimate):
            msg = (f"curve columns differ in length: {len(self.lambdas)} lambdas, {len(self.values)} values,"
                   f" {len(self.err_estimate)} errors")
            raise InternalConsistencyError(msg)


class HomogeneityConstants(NamedTuple):
    k1: float
    k2: float
    order: float


def r1_expectation(u: float) -> float:
    """P(Z(x) > u) for a standard Fréchet margin; the same for every region."""
    check_threshold(u)
    return -math.expm1(-1.0 / u)


def _excess_over(model: ExtremalModel, u: float, dependence: np.ndarray) -> np.ndarray:
    """e^{-Θ/u} - e^{-Θ∞/u}, computed from r = 2 - Θ."""
    limit_dependence = 2.0 - model.theta_limit()
    return math.exp(-model.theta_limit() / u) * np.expm1((dependence - limit_dependence) / u)


def limiting_risk_measure(model: ExtremalModel, u: float) -> float:
    """lim R2(λA) for λ -> ∞: e^{-Θ∞/u} - e^{-2/u}."""
    check_threshold(u)
    return math.exp(-2.0 / u) * math.expm1((2.0 - model.theta_limit()) / u)


def _floored(value: float, context: str) -> float:
    if value < VARIANCE_FLOOR:
        msg = f"negative variance {value} for {context}"
        raise InternalConsistencyError(msg)
    return max(value, 0.0)


def _radial_points(model: ExtremalModel, scale: float = 1.0) -> list[float]:
    length = model.length_scale()
    return [k * length / scale for k in LENGTH_MULTIPLES] + [b / scale for b in model.breakpoints()]


def variance_1d(model: ExtremalModel, region: Region, lambda_: float, u: float,
                tolerance: float = TOLERANCE_1D) -> Integral:
    """R2(λA) through the distance density of A, with its quadrature error."""
    check_threshold(u)
    if not lambda_ > 0:
        msg = f"homothety ratio must be positive, got {lambda_}"
        raise ParameterError(msg)
    if not model.isotropic:
        msg = f"{model} has no isotropic extremal coefficient, use the two-dimensional path"
        raise ParameterError(msg)
    if not isinstance(region, Region):
        msg = f"distance densities are only known for disks and squares, got {region}"
        raise ParameterError(msg)

    def integrand(h: float) -> float:
        excess = _excess_over(model, u, model.dependence(np.asarray(lambda_ * h)))
        return float(distance_density(region, h) * excess)

    points = _radial_points(model, lambda_)
    if region.shape is Shape.SQUARE:
        points.append(region.r)
    integral = integrate(integrand, 0.0, region.max_pair_distance, points, tolerance=tolerance)

    value = _floored(limiting_risk_measure(model, u) + integral.value, f"{model} on {lambda_}·{region}")
    logging.debug(f"R2 1-D for {model} on {lambda_}·{region}, u={u}: {value} ± {integral.error}")
    return Integral(value, integral.error, integral.evaluations)


def r2_variance_1d(model: ExtremalModel, region: Region, lambda_: float, u: float) -> float:
    return variance_1d(model, region, lambda_, u).value


def variance_2d(model: ExtremalModel, region: AnyRegion, lambda_: float, u: float,
                tolerance: float = TOLERANCE_2D) -> Integral:
    """R2(λA) = |λA|^-2 ∫ g(v) K_λA(v) dv over difference vectors, in polar coordinates."""
    check_threshold(u)
    if not lambda_ > 0:
        msg = f"homothety ratio must be positive, got {lambda_}"
        raise ParameterError(msg)

    scaled = region.scale(lambda_)
    domain = DifferenceDomain(scaled)
    normalisation = scaled.area ** 2
    model_points = _radial_points(model)

    def integrand(r: float, phi: float) -> float:
        offset = np.array([r * math.cos(phi), r * math.sin(phi)])
        excess = _excess_over(model, u, model.dependence_pair(offset))
        return float(excess) * covariogram(scaled, offset) / normalisation

    def radii(phi: float) -> tuple[float, list[float]]:
        outer, breakpoints = domain.radial_breakpoints(phi)
        return outer, breakpoints + [p for p in model_points if p < outer]

    integral = integrate_polar(integrand, domain.angular_breakpoints(), radii, tolerance=tolerance)

    value = _floored(limiting_risk_measure(model, u) + integral.value, f"{model} on {lambda_}·{region}")
    logging.debug(f"R2 2-D for {model} on {lambda_}·{region}, u={u}: {value} ± {integral.error}")
    return Integral(value, integral.error, integral.evaluations)


def r2_variance_2d(model: ExtremalModel, region: AnyRegion, lambda_: float, u: float) -> float:
    return variance_2d(model, region, lambda_, u).value


def _gaussian_tail_bound(model: ExtremalModel, cutoff: float, u: float) -> float:
    """Upper bound of 2π ∫_H^∞ h [e^{-Θ/u} - e^{-2/u}] dh through 2 - Θ = 2Φ(-x) <= 2φ(x)/x."""
    if isinstance(model, Smith):
        c = 2 * math.sqrt(model.eigenvalues[-1])
        return 2 * math.pi / u * 2 * c * c * float(ndtr(-cutoff / c))

    def mills(h: float) -> float:
        x = float(model.gaussian_tail_argument(np.asarray(h)))
        return 2 * h * math.exp(-x * x / 2) / (math.sqrt(2 * math.pi) * x)

    tail, _ = quad(mills, cutoff, math.inf)
    return 2 * math.pi / u * tail


def _gaussian_cutoff(model: ExtremalModel, u: float, max_doublings: int = 64) -> float:
    cutoff = 4 * model.length_scale()
    for _ in range(max_doublings):
        bound = _gaussian_tail_bound(model, cutoff, u)
        if bound < TAIL_TOLERANCE:
            logging.debug(f"σ² cutoff for {model} at {cutoff} (tail bound {bound})")
            return cutoff
        cutoff *= 2
    msg = f"no σ² cutoff found for {model} after {max_doublings} doublings"
    raise QuadratureError(msg)


def sigma_squared(model: ExtremalModel, u: float) -> float:
    """σ² = ∫_R² [e^{-Θ(x)/u} - e^{-2/u}] dx, finite when 2 - Θ is integrable."""
    check_threshold(u)
    if isinstance(model, Independence):
        logging.warning(f"{model} has σ² = 0: no dependence left to integrate")
        return 0.0
    if model.theta_limit() < 2.0:
        msg = f"σ² diverges for {model}: Θ(∞) = {model.theta_limit()} < 2"
        raise IntegrabilityError(msg)
    if isinstance(model, Smith) and not model.isotropic:
        return math.sqrt(np.linalg.det(model.sigma_mat)) * sigma_squared(Smith(1.0), u)
    if not hasattr(model, "gaussian_tail_argument") and not isinstance(model, Tube):
        msg = f"no integrability certificate for {model}"
        raise IntegrabilityError(msg)

    upper = max(model.breakpoints()) if isinstance(model, Tube) else _gaussian_cutoff(model, u)

    def integrand(h: float) -> float:
        excess = math.exp(-2.0 / u) * math.expm1(float(model.dependence(np.asarray(h))) / u)
        return 2 * math.pi * h * excess

    integral = integrate(integrand, 0.0, upper, _radial_points(model))
    logging.debug(f"σ² for {model}, u={u}: {integral.value} ± {integral.error} on [0, {upper}]")
    return integral.value


def homogeneity_constants_variance(model: ExtremalModel, region: AnyRegion, u: float,
                                   sigma2: float | None = None) -> HomogeneityConstants:
    """R2(λA) = K1 + K2 λ^-2 + o(λ^-2) with K1 = 0 and K2 = σ²/|A|; sigma2 skips recomputing σ²."""
    if sigma2 is None:
        sigma2 = sigma_squared(model, u)
    if sigma2 <= 0:
        msg = f"σ² = 0 for {model}: the variance has no order -2 term"
        raise DegenerateModelError(msg)
    return HomogeneityConstants(0.0, sigma2 / region.area, -2.0)


def homogeneity_constants_var(model: ExtremalModel, region: AnyRegion, u: float, alpha: float,
                              sigma2: float | None = None) -> HomogeneityConstants:
    """VaR_α(λA) = m + σ q_α / (λ √|A|) + o(1/λ)."""
    check_level(alpha)
    if alpha == 0.5:
        msg = "the VaR expansion has no order -1 term at alpha = 0.5 (q_alpha = 0)"
        raise ParameterError(msg)
    if sigma2 is None:
        sigma2 = sigma_squared(model, u)
    if sigma2 <= 0:
        msg = f"σ² = 0 for {model}: the VaR has no order -1 term"
        raise DegenerateModelError(msg)
    k2 = math.sqrt(sigma2) * float(ndtri(alpha)) / math.sqrt(region.area)
    return HomogeneityConstants(r1_expectation(u), k2, -1.0)


def clt_gaussian_approx(model: ExtremalModel, region: AnyRegion, lambda_: float, u: float, alpha: float) -> float:
    """Gaussian approximation of VaR_α(λA), valid for large λ."""
    check_level(alpha)
    if not lambda_ > 0:
        msg = f"homothety ratio must be positive, got {lambda_}"
        raise ParameterError(msg)
    q = float(ndtri(alpha))
    if q == 0.0:
        return r1_expectation(u)
    return r1_expectation(u) + math.sqrt(sigma_squared(model, u)) * q / (lambda_ * math.sqrt(region.area))


def clt_quantile_band(model: ExtremalModel, region: AnyRegion, lambda_: float, u: float,
                      coverage: float = 0.95) -> tuple[float, float]:
    """Central interval of the loss L_N(λA) under its Gaussian approximation."""
    check_level(coverage)
    spread = math.sqrt(sigma_squared(model, u)) * float(ndtri(0.5 + coverage / 2)) / (lambda_ * math.sqrt(region.area))
    m = r1_expectation(u)
    return m - spread, m + spread


def gev_to_frechet_threshold(params: GevParams, u1: float) -> float:
    """Threshold on the standard Fréchet scale equivalent to u1 for GEV(μ, σ, ξ) margins."""
    z = (u1 - params.mu) / params.sigma
    if abs(params.xi) < XI_ZERO:
        u = math.exp(z)
    else:
        bracket = 1.0 + params.xi * z
        if bracket <= 0:
            msg = f"1 + ξ(u1 - μ)/σ = {bracket} <= 0 for {params}, u1={u1}: u1 is outside the GEV support"
            raise InvalidThresholdError(msg)
        u = math.exp(math.log1p(params.xi * z) / params.xi)

    if not (u > 0 and math.isfinite(u)):
        msg = f"transformed threshold {u} for {params}, u1={u1} is not a positive real"
        raise InvalidThresholdError(msg)
    return u


def _check_lambdas(lambdas: list[float]) -> list[float]:
    lambdas = [float(lambda_) for lambda_ in lambdas]
    if not lambdas:
        msg = "the λ grid is empty"
        raise ParameterError(msg)
    if any(not lambda_ > 0 for lambda_ in lambdas):
        msg = f"λ values must be positive, got {lambdas}"
        raise ParameterError(msg)
    if any(b <= a for a, b in zip(lambdas, lambdas[1:], strict=False)):
        msg = "the λ grid must be strictly ascending"
        raise ParameterError(msg)
    return lambdas


def risk_curve(query: RiskQuery, lambdas: list[float], mc: MonteCarloSettings | None = None,
               workers: int | None = None) -> RiskCurve:
    """λ -> R(λA) on a grid, through the cheapest path available for the query."""
    lambdas = _check_lambdas(lambdas)
    logging.info(f"evaluating {query} on {len(lambdas)} λ values")

    if query.kind is RiskKind.EXPECTATION:
        value = r1_expectation(query.u)
        return RiskCurve(lambdas, [value] * len(lambdas), value, Provenance.QUADRATURE_1D, [0.0] * len(lambdas))

    if query.kind is RiskKind.VARIANCE:
        one_dimensional = isinstance(query.region, Region) and query.model.isotropic
        provenance = Provenance.QUADRATURE_1D if one_dimensional else Provenance.QUADRATURE_2D
        method = variance_1d if one_dimensional else variance_2d

        def point(lambda_: float) -> Integral:
            integral = method(query.model, query.region, lambda_, query.u)
            logging.info(f"λ={lambda_}: {integral.value} ± {integral.error}")
            return integral

        integrals = parallel_map(point, lambdas, workers)
        return RiskCurve(lambdas, [i.value for i in integrals], limiting_risk_measure(query.model, query.u),
                         provenance, [i.error for i in integrals])

    if mc is not None:
        if not isinstance(query.region, Region):
            msg = f"Monte-Carlo VaR needs a disk or square region, got {query.region}"
            raise ParameterError(msg)
        values, errors = [], []
        for lambda_ in lambdas:
            grid = GridSpec(query.region, lambda_, mc.m_per_unit)
            losses = simulate_losses(query.model, grid, query.u, mc, workers)
            estimate = quantile_with_error(losses, query.alpha)
            logging.info(f"λ={lambda_}: VaR {estimate.value} ± {estimate.stderr} from {len(losses)} replicates")
            values.append(estimate.value)
            errors.append(estimate.stderr)
        return RiskCurve(lambdas, values, r1_expectation(query.u), Provenance.MONTE_CARLO, errors)

    values = [clt_gaussian_approx(query.model, query.region, lambda_, query.u, query.alpha) for lambda_ in lambdas]
    return RiskCurve(lambdas, values, r1_expectation(query.u), Provenance.GAUSSIAN_APPROXIMATION,
                     [math.nan] * len(lambdas), notes=["asymptotic Gaussian approximation, accurate for large λ only"])
