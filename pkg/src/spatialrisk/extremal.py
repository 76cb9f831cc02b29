import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln, kve, ndtr

from .errors import InternalConsistencyError, ParameterError

"""Correlation families, semivariograms and the extremal coefficient functions of the supported
max-stable models.

Every model exposes r(h) = 2 - Θ(h) (`dependence`) as its primitive: it is computed without
cancellation from survival functions, which keeps e^{-Θ/u} - e^{-2/u} accurate when Θ is close to 2.
"""

THETA_TOLERANCE = 1e-12


class CorrelationKind(Enum):
    WHITTLE_MATERN = "whittle-matern"
    CAUCHY = "cauchy"
    POWERED_EXPONENTIAL = "powered-exponential"


@dataclass(frozen=True)
class CorrelationFamily:
    kind: CorrelationKind
    c1: float = 1.0
    c2: float = 0.5

    def __post_init__(self) -> None:
        if not self.c1 > 0:
            msg = f"range parameter c1 must be positive, got {self.c1}"
            raise ParameterError(msg)
        if not self.c2 > 0:
            msg = f"smoothing parameter c2 must be positive, got {self.c2}"
            raise ParameterError(msg)
        if self.kind is CorrelationKind.POWERED_EXPONENTIAL and not self.c2 < 2:
            msg = f"powered exponential correlation requires 0 < c2 < 2, got {self.c2}"
            raise ParameterError(msg)

    def limit(self) -> float:
        """ρ(∞): all supported families decay to 0."""
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "c1": self.c1, "c2": self.c2}

    def __repr__(self) -> str:
        return f"{self.kind.value}(c1={self.c1}, c2={self.c2})"


@dataclass(frozen=True)
class Semivariogram:
    eta: float
    a: float

    def __post_init__(self) -> None:
        if not self.eta > 0:
            msg = f"semivariogram scale eta must be positive, got {self.eta}"
            raise ParameterError(msg)
        if not 0 < self.a <= 2:
            msg = f"semivariogram exponent a must lie in (0, 2], got {self.a}"
            raise ParameterError(msg)

    def to_dict(self) -> dict:
        return {"eta": self.eta, "a": self.a}


def _distances(h: float | np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if np.any(h < 0) or np.any(np.isnan(h)):
        msg = f"distances must be non-negative, got {h}"
        raise ParameterError(msg)
    return h


def _like_input(values: np.ndarray, h: float | np.ndarray) -> float | np.ndarray:
    return float(values) if np.ndim(h) == 0 else values


def correlation(family: CorrelationFamily, h: float | np.ndarray) -> float | np.ndarray:
    """ρ(h) of a correlation family, vectorised over h."""
    distances = _distances(h)
    x = distances / family.c1

    if family.kind is CorrelationKind.CAUCHY:
        values = np.power(1.0 + x * x, -family.c2)
    elif family.kind is CorrelationKind.POWERED_EXPONENTIAL:
        values = np.exp(-np.power(x, family.c2))
    else:
        nu = family.c2
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            log_rho = (1.0 - nu) * math.log(2.0) - gammaln(nu) + nu * np.log(x) + np.log(kve(nu, x)) - x
            values = np.exp(log_rho)
        # x -> 0 is handled by its analytic limit; overflow of K_nu only happens there too
        values = np.where((x == 0) | ~np.isfinite(values), 1.0, np.minimum(values, 1.0))

    return _like_input(values, h)


def semivariogram(vario: Semivariogram, h: float | np.ndarray) -> float | np.ndarray:
    distances = _distances(h)
    return _like_input(vario.eta * np.power(distances, vario.a), h)


def disc_intersection_area(h: float | np.ndarray, r_b: float) -> float | np.ndarray:
    """Area of the intersection of two discs of radius r_b whose centers are h apart."""
    if not r_b > 0:
        msg = f"disc radius must be positive, got {r_b}"
        raise ParameterError(msg)
    distances = _distances(h)

    inside = distances <= 2 * r_b
    clipped = np.minimum(distances, 2 * r_b)
    chord = np.sqrt(np.maximum(4 * r_b * r_b - clipped * clipped, 0.0))
    ratio = np.minimum(chord / (2 * r_b), 1.0)
    area = 2 * (r_b * r_b * np.arcsin(ratio) - clipped / 4 * chord)
    return _like_input(np.where(inside, np.maximum(area, 0.0), 0.0), h)


class ExtremalModel:
    """A simple stationary max-stable model described by its extremal coefficient function."""

    kind: str = ""
    isotropic: bool = True
    simulable: bool = False

    def dependence(self, h: np.ndarray) -> np.ndarray:
        """r(h) = 2 - Θ(h) for isotropic models, on an array of distances."""
        raise NotImplementedError

    def dependence_pair(self, offsets: np.ndarray) -> np.ndarray:
        """r(x1 - x2) for an (..., 2) array of offsets."""
        return self.dependence(np.linalg.norm(offsets, axis=-1))

    def theta_limit(self) -> float:
        """lim Θ(h) for h -> ∞."""
        raise NotImplementedError

    def length_scale(self) -> float:
        """Characteristic dependence distance, used to place quadrature breakpoints."""
        return 1.0

    def breakpoints(self) -> list[float]:
        """Distances where Θ is not smooth."""
        return []

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self) -> str:
        parameters = ", ".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "model")
        return f"{self.kind}({parameters})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExtremalModel) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(self))


class Smith(ExtremalModel):
    kind = "smith"
    simulable = True

    def __init__(self, sigma_mat: np.ndarray | list | float = 1.0) -> None:
        sigma = np.asarray(sigma_mat, dtype=float)
        sigma = sigma * np.eye(2) if sigma.ndim == 0 else sigma
        if sigma.shape != (2, 2) or not np.allclose(sigma, sigma.T):
            msg = f"Smith covariance must be a symmetric 2x2 matrix, got {sigma.tolist()}"
            raise ParameterError(msg)
        eigenvalues = np.linalg.eigvalsh(sigma)
        if eigenvalues[0] <= 0:
            msg = f"Smith covariance must be positive definite, got eigenvalues {eigenvalues.tolist()}"
            raise ParameterError(msg)

        self.sigma_mat: np.ndarray = sigma
        self.precision: np.ndarray = np.linalg.inv(sigma)
        self.isotropic = bool(sigma[0, 1] == 0 and sigma[0, 0] == sigma[1, 1])
        self.eigenvalues: np.ndarray = eigenvalues

    def dependence(self, h: np.ndarray) -> np.ndarray:
        if not self.isotropic:
            msg = f"{self} is anisotropic: Θ(h) needs Σ proportional to the identity, use the pairwise form"
            raise ParameterError(msg)
        return 2 * ndtr(-h / (2 * math.sqrt(self.sigma_mat[0, 0])))

    def dependence_pair(self, offsets: np.ndarray) -> np.ndarray:
        mahalanobis = np.sqrt(np.einsum("...i,ij,...j->...", offsets, self.precision, offsets))
        return 2 * ndtr(-mahalanobis / 2)

    def theta_limit(self) -> float:
        return 2.0

    def length_scale(self) -> float:
        return math.sqrt(self.eigenvalues[-1])

    def gaussian_tail_argument(self, h: np.ndarray) -> np.ndarray:
        """x(h) with 2 - Θ(h) = 2 Φ(-x(h)) along the least favourable direction."""
        return h / (2 * math.sqrt(self.eigenvalues[-1]))

    def to_dict(self) -> dict:
        return {"model": self.kind, "sigma_mat": self.sigma_mat.tolist()}


class Schlather(ExtremalModel):
    kind = "schlather"
    simulable = True

    def __init__(self, corr: CorrelationFamily) -> None:
        self.corr: CorrelationFamily = corr

    def dependence(self, h: np.ndarray) -> np.ndarray:
        return 1.0 - np.sqrt((1.0 - correlation(self.corr, h)) / 2)

    def theta_limit(self) -> float:
        return 1.0 + math.sqrt((1.0 - self.corr.limit()) / 2)

    def length_scale(self) -> float:
        return self.corr.c1

    def to_dict(self) -> dict:
        return {"model": self.kind, "corr": self.corr.to_dict()}


class GeometricGaussian(ExtremalModel):
    kind = "geometric-gaussian"
    simulable = True

    def __init__(self, sigma_eps: float, corr: CorrelationFamily) -> None:
        if not sigma_eps > 0:
            msg = f"sigma_eps must be positive, got {sigma_eps}"
            raise ParameterError(msg)
        self.sigma_eps: float = sigma_eps
        self.corr: CorrelationFamily = corr

    def dependence(self, h: np.ndarray) -> np.ndarray:
        variogram = self.sigma_eps ** 2 * (1.0 - correlation(self.corr, h))
        return 2 * ndtr(-np.sqrt(variogram / 2))

    def theta_limit(self) -> float:
        return 2 * float(ndtr(math.sqrt(self.sigma_eps ** 2 * (1.0 - self.corr.limit()) / 2)))

    def length_scale(self) -> float:
        return self.corr.c1

    def to_dict(self) -> dict:
        return {"model": self.kind, "sigma_eps": self.sigma_eps, "corr": self.corr.to_dict()}


class BrownResnick(ExtremalModel):
    kind = "brown-resnick"
    simulable = True

    def __init__(self, vario: Semivariogram) -> None:
        self.vario: Semivariogram = vario

    def dependence(self, h: np.ndarray) -> np.ndarray:
        return 2 * ndtr(-self.gaussian_tail_argument(h))

    def gaussian_tail_argument(self, h: np.ndarray) -> np.ndarray:
        return np.sqrt(semivariogram(self.vario, h) / 2)

    def theta_limit(self) -> float:
        return 2.0

    def length_scale(self) -> float:
        return self.vario.eta ** (-1.0 / self.vario.a)

    def to_dict(self) -> dict:
        return {"model": self.kind, "vario": self.vario.to_dict()}


class Tube(ExtremalModel):
    kind = "tube"
    simulable = True

    def __init__(self, r_b: float = 1.0) -> None:
        if not r_b > 0:
            msg = f"tube radius r_b must be positive, got {r_b}"
            raise ParameterError(msg)
        self.r_b: float = r_b
        self.h_b: float = 1.0 / (math.pi * r_b * r_b)

    def dependence(self, h: np.ndarray) -> np.ndarray:
        return self.h_b * disc_intersection_area(h, self.r_b)

    def theta_limit(self) -> float:
        return 2.0

    def length_scale(self) -> float:
        return self.r_b

    def breakpoints(self) -> list[float]:
        return [2 * self.r_b]

    def to_dict(self) -> dict:
        return {"model": self.kind, "r_b": self.r_b}


class PerfectDependence(ExtremalModel):
    """Θ ≡ 1: the field is a single Fréchet variable repeated everywhere."""

    kind = "perfect-dependence"
    simulable = True

    def dependence(self, h: np.ndarray) -> np.ndarray:
        return np.ones_like(h, dtype=float)

    def theta_limit(self) -> float:
        return 1.0

    def to_dict(self) -> dict:
        return {"model": self.kind}


class Independence(ExtremalModel):
    """Θ ≡ 2 (with Θ(0) = 1 at coinciding sites)."""

    kind = "independence"
    simulable = True

    def dependence(self, h: np.ndarray) -> np.ndarray:
        return np.where(h == 0, 1.0, 0.0)

    def theta_limit(self) -> float:
        return 2.0

    def to_dict(self) -> dict:
        return {"model": self.kind}


def _checked_theta(dependence: np.ndarray, model: ExtremalModel) -> np.ndarray:
    theta = 2.0 - dependence
    if np.any(theta < 1 - THETA_TOLERANCE) or np.any(theta > 2 + THETA_TOLERANCE) or np.any(np.isnan(theta)):
        bad = theta[(theta < 1 - THETA_TOLERANCE) | (theta > 2 + THETA_TOLERANCE) | np.isnan(theta)]
        msg = f"extremal coefficient of {model} left [1, 2]: {bad[:5].tolist()}"
        raise InternalConsistencyError(msg)
    return theta


def mixing_diagnostic(model: ExtremalModel, h: float | np.ndarray) -> float | np.ndarray:
    """r(h) = 2 - Θ(h); tends to 0 iff the model is mixing."""
    distances = _distances(h)
    dependence = model.dependence(distances)
    _checked_theta(dependence, model)
    return _like_input(dependence, h)


def extremal_coefficient(model: ExtremalModel, h: float | np.ndarray) -> float | np.ndarray:
    distances = _distances(h)
    return _like_input(_checked_theta(model.dependence(distances), model), h)


def pairwise_extremal_coefficient(model: ExtremalModel, x1: np.ndarray | tuple, x2: np.ndarray | tuple) -> float | np.ndarray:
    offsets = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    theta = _checked_theta(model.dependence_pair(offsets), model)
    return float(theta) if theta.ndim == 0 else theta


def extremal_coefficient_limit(model: ExtremalModel) -> float:
    return model.theta_limit()


def is_mixing(model: ExtremalModel) -> bool:
    return model.theta_limit() == 2.0


def tube_bivariate_cdf(r_b: float, h: float, z1: float, z2: float) -> float:
    """P(Z(x1) <= z1, Z(x2) <= z2) for the tube process at distance h."""
    if not (z1 > 0 and z2 > 0):
        msg = f"tube distribution function needs positive levels, got z1={z1}, z2={z2}"
        raise ParameterError(msg)

    tube = Tube(r_b)
    exclusive = tube.h_b * (math.pi * r_b * r_b - disc_intersection_area(h, r_b))
    if z2 <= z1:
        exponent = exclusive / z1 + 1.0 / z2
    else:
        exponent = 1.0 / z1 + exclusive / z2
    return math.exp(-exponent)


def model_from_dict(data: dict) -> ExtremalModel:
    data = dict(data)
    kind = data.pop("model", None)
    logging.debug(f"building {kind} model from {data}")

    try:
        if kind == Smith.kind:
            return Smith(data.get("sigma_mat", 1.0))
        if kind == Schlather.kind:
            return Schlather(_correlation_from_dict(data["corr"]))
        if kind == GeometricGaussian.kind:
            return GeometricGaussian(float(data["sigma_eps"]), _correlation_from_dict(data["corr"]))
        if kind == BrownResnick.kind:
            vario = data["vario"]
            return BrownResnick(Semivariogram(float(vario["eta"]), float(vario["a"])))
        if kind == Tube.kind:
            return Tube(float(data.get("r_b", 1.0)))
        if kind == PerfectDependence.kind:
            return PerfectDependence()
        if kind == Independence.kind:
            return Independence()
    except KeyError as e:
        msg = f"missing parameter {e} for model {kind}"
        raise ParameterError(msg) from e

    msg = f"unknown model: {kind}"
    raise ParameterError(msg)


def _correlation_from_dict(data: dict) -> CorrelationFamily:
    try:
        kind = CorrelationKind(data["kind"])
    except ValueError as e:
        msg = f"unknown correlation family: {data['kind']}"
        raise ParameterError(msg) from e
    return CorrelationFamily(kind, float(data.get("c1", 1.0)), float(data.get("c2", 0.5)))
