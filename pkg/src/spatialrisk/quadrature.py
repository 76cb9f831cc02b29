import logging
import math
import warnings
from collections.abc import Callable, Iterable
from dataclasses import dataclass

from scipy.integrate import IntegrationWarning, quad

from .errors import QuadratureError

"""Adaptive Gauss-Kronrod quadrature (QUADPACK through scipy) with explicit panels.

Integrals are split at caller-supplied breakpoints and the panel results are summed in a fixed order,
so a value never depends on how work was scheduled.
"""

TOLERANCE_1D = 1e-9
TOLERANCE_2D = 1e-7


@dataclass(frozen=True)
class Integral:
    """error: sum of the QUADPACK absolute-error estimates of the panels, for 2-D integrals plus the worst
    inner error times the angular range. It is an estimate, not a guaranteed bound."""

    value: float
    error: float
    evaluations: int


def panels(a: float, b: float, points: Iterable[float] = ()) -> list[tuple[float, float]]:
    edges = sorted({a, b} | {p for p in points if a < p < b})
    return [(lo, hi) for lo, hi in zip(edges, edges[1:], strict=False) if hi > lo]


def integrate(func: Callable[[float], float], a: float, b: float, points: Iterable[float] = (),
              tolerance: float = TOLERANCE_1D, epsrel: float = 1e-10, limit: int = 200) -> Integral:
    """Integrate func over [a, b], raising QuadratureError when the error estimate exceeds tolerance."""
    intervals = panels(a, b, points)
    if not intervals:
        return Integral(0.0, 0.0, 0)

    values, errors, evaluations = [], [], 0
    epsabs = tolerance / (10 * len(intervals))
    for lo, hi in intervals:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            result = quad(func, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
        value, error, info = result[0], result[1], result[2]
        if len(result) > 3:
            logging.debug(f"quadrature on [{lo}, {hi}] reported: {result[3]}")
        values.append(value)
        errors.append(error)
        evaluations += info["neval"]

    integral = Integral(math.fsum(values), math.fsum(errors), evaluations)
    logging.debug(f"integrated over {len(intervals)} panels of [{a}, {b}]: {integral}")
    if not math.isfinite(integral.value) or integral.error > tolerance:
        msg = f"quadrature over [{a}, {b}] did not converge: estimate {integral.value}, error {integral.error} > {tolerance}"
        raise QuadratureError(msg)
    return integral


def integrate_polar(func: Callable[[float, float], float], angles: list[float],
                    radii: Callable[[float], tuple[float, list[float]]], tolerance: float = TOLERANCE_2D) -> Integral:
    """∫∫ func(r, phi) r dr dphi where, for each phi, r ranges over [0, radii(phi)[0]] split at radii(phi)[1]."""
    inner_errors, inner_evaluations = [], [0]
    inner_tolerance = tolerance / (100 * (angles[-1] - angles[0]))

    def radial(phi: float) -> float:
        outer, breakpoints = radii(phi)
        inner = integrate(lambda r: func(r, phi) * r, 0.0, outer, breakpoints, tolerance=inner_tolerance)
        inner_errors.append(inner.error)
        inner_evaluations[0] += inner.evaluations
        return inner.value

    outer = integrate(radial, angles[0], angles[-1], angles[1:-1], tolerance=tolerance / 2)
    error = outer.error + (angles[-1] - angles[0]) * max(inner_errors, default=0.0)
    integral = Integral(outer.value, error, inner_evaluations[0])
    if integral.error > tolerance:
        msg = f"2-D quadrature did not converge: estimate {integral.value}, error {integral.error} > {tolerance}"
        raise QuadratureError(msg)
    return integral
