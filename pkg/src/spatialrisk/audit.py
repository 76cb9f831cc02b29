import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import DegenerateModelError, InsufficientGridError, IntegrabilityError, ParameterError
from .extremal import PerfectDependence
from .geometry import AnyRegion, ConvexPolygon, Region, RegionUnion, Shape
from .risk import (
    HomogeneityConstants,
    RiskKind,
    RiskQuery,
    homogeneity_constants_var,
    homogeneity_constants_variance,
    limiting_risk_measure,
    r1_expectation,
    risk_curve,
    variance_2d,
)
from .simulation import GridSpec, MonteCarloSettings, empirical_var, grid_loss_variance
from .workers import parallel_map

"""Numeric audits of the axioms of spatial risk measures: invariance under translation, spatial
sub-additivity and asymptotic spatial homogeneity.

A verdict is evidence at the configured tolerances, never a proof: every report carries the compared
values so a failure can be inspected.
"""

ANALYTIC_TOLERANCE = 1e-10
TRANSLATION_TOLERANCE = 1e-8
MC_SIGMAS = 3.0
ORDER_TOLERANCE = 0.10
K2_TOLERANCE = 0.05
K2_TOLERANCE_MC = 0.15
CONSTANT_TOLERANCE = 1e-12
DISK_GRID_M = 7


class Axiom(Enum):
    TRANSLATION_INVARIANCE = "translation-invariance"
    SPATIAL_SUBADDITIVITY = "spatial-subadditivity"
    ASYMPTOTIC_HOMOGENEITY = "asymptotic-homogeneity"


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class Evidence:
    input: str
    lhs: float
    rhs: float
    tolerance: float
    relation: str = "=="

    @property
    def holds(self) -> bool:
        if self.relation == "<=":
            return self.lhs <= self.rhs + self.tolerance
        return abs(self.lhs - self.rhs) <= self.tolerance

    def to_dict(self) -> dict:
        return {"input": self.input, "lhs": self.lhs, "rhs": self.rhs, "tolerance": self.tolerance,
                "relation": self.relation}


@dataclass
class AuditReport:
    axiom: Axiom
    verdict: Verdict
    evidence: list[Evidence] = field(default_factory=list)
    conjectural: bool = False
    notes: list[str] = field(default_factory=list)
    fitted_order: float | None = None
    fitted_k1: float | None = None
    fitted_k2: float | None = None

    def to_dict(self) -> dict:
        return {
            "axiom": self.axiom.value,
            "verdict": self.verdict.value,
            "conjectural": self.conjectural,
            "notes": list(self.notes),
            "fitted_order": self.fitted_order,
            "fitted_K1": self.fitted_k1,
            "fitted_K2": self.fitted_k2,
            "evidence": [row.to_dict() for row in self.evidence],
        }

    @staticmethod
    def from_dict(data: dict) -> "AuditReport":
        return AuditReport(
            axiom=Axiom(data["axiom"]),
            verdict=Verdict(data["verdict"]),
            evidence=[Evidence(row["input"], row["lhs"], row["rhs"], row["tolerance"], row.get("relation", "=="))
                      for row in data["evidence"]],
            conjectural=data.get("conjectural", False),
            notes=list(data.get("notes", [])),
            fitted_order=data.get("fitted_order"),
            fitted_k1=data.get("fitted_K1"),
            fitted_k2=data.get("fitted_K2"),
        )

    def __str__(self) -> str:
        flag = " (conjectural)" if self.conjectural else ""
        return f"{self.axiom.value}: {self.verdict.value}{flag}, {len(self.evidence)} rows"


class HomogeneityFit(NamedTuple):
    report: AuditReport
    fitted_k1: float
    fitted_k2: float
    fitted_order: float


def _polygonal(region: AnyRegion) -> AnyRegion:
    """Squares become polygons so that translations reach the covariogram through clipping."""
    if isinstance(region, Region) and region.shape is Shape.SQUARE:
        return region.as_polygon()
    return region


def _value(query: RiskQuery, region: AnyRegion, lambda_: float, mc: MonteCarloSettings | None,
           workers: int | None) -> tuple[float, float]:
    """R(λ·region) and the standard error (Monte-Carlo) or error estimate (quadrature) attached to it."""
    if mc is not None and query.kind is RiskKind.VARIANCE:
        moments = empirical_var(query.model, GridSpec(region, lambda_, mc.m_per_unit), query.u, mc.replicates,
                                mc.seed, mc, workers)
        return moments.variance, moments.stderr
    if query.kind is RiskKind.VARIANCE and not isinstance(region, Region):
        integral = variance_2d(query.model, region, lambda_, query.u)
        return integral.value, integral.error

    curve = risk_curve(replace(query, region=region), [lambda_], mc, workers)
    return curve.values[0], curve.err_estimate[0]


def _tolerance(analytic: float, errors: tuple[float, ...], mc: MonteCarloSettings | None) -> float:
    if mc is not None:
        return MC_SIGMAS * math.sqrt(sum(e * e for e in errors))
    return max(analytic, sum(errors))


def _var_needs_simulation(axiom: Axiom, query: RiskQuery, mc: MonteCarloSettings | None,
                          conjectural: bool = False) -> AuditReport | None:
    """VaR audits compare simulated quantiles; the Gaussian approximation satisfies every axiom by construction."""
    if query.kind is not RiskKind.VAR or mc is not None:
        return None
    return AuditReport(axiom, Verdict.NOT_APPLICABLE, conjectural=conjectural,
                       notes=["VaR audits need Monte-Carlo settings, the Gaussian approximation is not evidence"])


def _grid_variance(query: RiskQuery, region: Region) -> tuple[float, float]:
    return grid_loss_variance(query.model, GridSpec(region, 1.0, DISK_GRID_M), query.u), 0.0


def audit_translation_invariance(query: RiskQuery, translations: list[tuple[float, float]],
                                 mc: MonteCarloSettings | None = None, workers: int | None = None) -> AuditReport:
    """R(A + v) = R(A) for every v, with the region moved in the plane rather than in the formulas.

    Disk covariograms only see |v|, so analytic disk audits move the sites of a simulation grid instead.
    """
    if (skipped := _var_needs_simulation(Axiom.TRANSLATION_INVARIANCE, query, mc)) is not None:
        return skipped
    if mc is not None and not isinstance(query.region, Region):
        return AuditReport(Axiom.TRANSLATION_INVARIANCE, Verdict.NOT_APPLICABLE,
                           notes=[f"Monte-Carlo audits need a disk or square, got {query.region}"])

    notes = []
    base = query.region if mc is not None else _polygonal(query.region)
    on_grid = (mc is None and query.kind is RiskKind.VARIANCE and isinstance(base, Region)
               and base.shape is Shape.DISK)
    if on_grid:
        notes.append(f"exact variance of the loss over the sites of a {DISK_GRID_M} per unit grid, moved with the disk")

    def evaluate(region: AnyRegion) -> tuple[float, float]:
        if on_grid:
            return _grid_variance(query, region)
        if mc is None and query.kind is RiskKind.VARIANCE:
            integral = variance_2d(query.model, region, 1.0, query.u)
            return integral.value, integral.error
        return _value(query, region, 1.0, mc, workers)

    reference, reference_error = evaluate(base)

    def shifted(v: tuple[float, float]) -> Evidence:
        value, error = evaluate(base.translate(v))
        tolerance = _tolerance(TRANSLATION_TOLERANCE, (error, reference_error), mc)
        return Evidence(f"v=({v[0]}, {v[1]})", value, reference, tolerance)

    evidence = [shifted(tuple(v)) for v in translations]
    verdict = Verdict.PASS if all(row.holds for row in evidence) else Verdict.FAIL
    report = AuditReport(Axiom.TRANSLATION_INVARIANCE, verdict, evidence, notes=notes)
    logging.info(f"{query}: {report}")
    return report


def audit_subadditivity(query: RiskQuery, lambda_grid: list[float], mc: MonteCarloSettings | None = None,
                        workers: int | None = None) -> AuditReport:
    """λ -> R(λA) must not increase along the nested homothetic family of a disk or a square."""
    conjectural = query.kind is RiskKind.VAR
    if (skipped := _var_needs_simulation(Axiom.SPATIAL_SUBADDITIVITY, query, mc, conjectural)) is not None:
        return skipped
    notes = ["checked through anti-monotonicity over nested homothetic regions"]
    if conjectural:
        notes.append("sub-additivity of the VaR is not established, the verdict is statistical evidence only")
    if not isinstance(query.region, Region):
        notes.append(f"nested homothetic families are audited on disks and squares, got {query.region}")
        return AuditReport(Axiom.SPATIAL_SUBADDITIVITY, Verdict.NOT_APPLICABLE, conjectural=conjectural, notes=notes)

    lambdas = sorted(float(lambda_) for lambda_ in lambda_grid)
    if mc is not None and query.kind is RiskKind.VARIANCE:
        points = parallel_map(lambda lambda_: _value(query, query.region, lambda_, mc, None), lambdas, workers)
        values, errors = [p[0] for p in points], [p[1] for p in points]
    else:
        curve = risk_curve(query, lambdas, mc, workers)
        values, errors = curve.values, curve.err_estimate

    evidence, violations = [], 0
    for k in range(len(lambdas) - 1):
        tolerance = _tolerance(ANALYTIC_TOLERANCE, (errors[k], errors[k + 1]), mc)
        row = Evidence(f"lambda {lambdas[k]} -> {lambdas[k + 1]}", values[k + 1], values[k], tolerance, "<=")
        evidence.append(row)
        if not row.holds:
            violations += 1
            logging.warning(f"{query}: risk increases from {row.rhs} to {row.lhs} ({row.input})")

    verdict = Verdict.FAIL if violations else Verdict.PASS
    report = AuditReport(Axiom.SPATIAL_SUBADDITIVITY, verdict, evidence, conjectural, notes)
    logging.info(f"{query}: {report}")
    return report


def audit_union_subadditivity(query: RiskQuery, first: AnyRegion, second: AnyRegion) -> AuditReport:
    """R(A1 ∪ A2) <= min(R(A1), R(A2)) for two disjoint convex regions, through the 2-D quadrature."""
    if query.kind is RiskKind.VAR:
        return AuditReport(Axiom.SPATIAL_SUBADDITIVITY, Verdict.NOT_APPLICABLE, conjectural=True,
                           notes=["no quadrature for the VaR of a union"])

    parts = []
    for region in (first, second):
        polygon = _polygonal(region)
        if not isinstance(polygon, ConvexPolygon):
            msg = f"unions are built from squares and convex polygons, got {region}"
            raise ParameterError(msg)
        parts.append(polygon)
    union = RegionUnion(tuple(parts))

    if query.kind is RiskKind.EXPECTATION:
        value = r1_expectation(query.u)
        values, errors = [value, value, value], [0.0, 0.0, 0.0]
    else:
        integrals = [variance_2d(query.model, region, 1.0, query.u) for region in (union, parts[0], parts[1])]
        values, errors = [i.value for i in integrals], [i.error for i in integrals]

    smallest = min(values[1], values[2])
    tolerance = max(ANALYTIC_TOLERANCE, sum(errors))
    row = Evidence("union of two disjoint regions", values[0], smallest, tolerance, "<=")
    verdict = Verdict.PASS if row.holds else Verdict.FAIL
    report = AuditReport(Axiom.SPATIAL_SUBADDITIVITY, verdict, [row],
                         notes=[f"R(A1)={values[1]}, R(A2)={values[2]}"])
    logging.info(f"{query} on a union: {report}")
    return report


def expected_homogeneity(query: RiskQuery) -> HomogeneityConstants | None:
    """Theoretical (K1, K2, order) of R(λA), or None when only the limit is known."""
    if query.kind is RiskKind.EXPECTATION:
        return HomogeneityConstants(r1_expectation(query.u), 0.0, 0.0)
    if isinstance(query.model, PerfectDependence):
        return HomogeneityConstants(limiting_risk_measure(query.model, query.u), 0.0, 0.0)

    try:
        if query.kind is RiskKind.VARIANCE:
            return homogeneity_constants_variance(query.model, query.region, query.u)
        return homogeneity_constants_var(query.model, query.region, query.u, query.alpha)
    except DegenerateModelError:
        k1 = limiting_risk_measure(query.model, query.u) if query.kind is RiskKind.VARIANCE else r1_expectation(query.u)
        return HomogeneityConstants(k1, 0.0, 0.0)
    except IntegrabilityError as e:
        logging.info(f"no homogeneity order for {query.model}: {e}")
        return None


def _fit_order(lambdas: np.ndarray, residuals: np.ndarray) -> float:
    kept = np.abs(residuals) > 0
    if kept.sum() < 2:
        return 0.0
    slope, _ = np.polyfit(np.log(lambdas[kept]), np.log(np.abs(residuals[kept])), 1)
    return float(-slope)


def audit_asymptotic_homogeneity(query: RiskQuery, lambda_grid: list[float], mc: MonteCarloSettings | None = None,
                                 workers: int | None = None) -> HomogeneityFit:
    """Fit R(λA) = K1 + K2 / λ^order on the upper half (in log λ) of the grid."""
    lambdas = np.array(sorted(float(lambda_) for lambda_ in lambda_grid))
    if len(lambdas) < 4 or lambdas[0] <= 0 or lambdas[-1] / lambdas[0] < 10:
        msg = f"homogeneity fits need at least 4 positive λ values spanning a decade, got {lambdas.tolist()}"
        raise InsufficientGridError(msg)
    if (skipped := _var_needs_simulation(Axiom.ASYMPTOTIC_HOMOGENEITY, query, mc)) is not None:
        return HomogeneityFit(skipped, r1_expectation(query.u), math.nan, math.nan)

    expected = expected_homogeneity(query)
    k1 = expected.k1 if expected is not None else limiting_risk_measure(query.model, query.u)
    if expected is None and query.kind is RiskKind.VAR:
        report = AuditReport(Axiom.ASYMPTOTIC_HOMOGENEITY, Verdict.NOT_APPLICABLE,
                             notes=[f"no theoretical VaR expansion for {query.model}, nothing to fit against"])
        logging.info(f"{query}: {report}")
        return HomogeneityFit(report, r1_expectation(query.u), math.nan, math.nan)

    if mc is not None and query.kind is RiskKind.VARIANCE:
        points = parallel_map(lambda lambda_: _value(query, query.region, lambda_, mc, None), list(lambdas), workers)
        values = np.array([p[0] for p in points])
    else:
        values = np.array(risk_curve(query, list(lambdas), mc, workers).values)

    tail = lambdas >= math.sqrt(lambdas[0] * lambdas[-1])
    tail_lambdas, residuals = lambdas[tail], values[tail] - k1
    notes = [f"fitted on λ in [{tail_lambdas[0]}, {tail_lambdas[-1]}] ({len(tail_lambdas)} points)"]

    if np.all(np.abs(residuals) <= CONSTANT_TOLERANCE * max(1.0, abs(k1))):
        order, k2 = 0.0, 0.0
    else:
        order = _fit_order(tail_lambdas, residuals)
        power = -expected.order if expected is not None and expected.order != 0 else order
        scaled = residuals * tail_lambdas ** power
        if mc is None:
            _, k2 = np.polyfit(1.0 / tail_lambdas, scaled, 1)
            k2 = float(k2)
        else:
            k2 = float(np.mean(scaled))

    evidence = []
    if expected is None:
        verdict = Verdict.NOT_APPLICABLE
        notes.append(f"no theoretical order for {query.model}, only K1 = {k1} is known")
    else:
        target = -expected.order
        order_tolerance = ORDER_TOLERANCE * target if target else ORDER_TOLERANCE
        k2_tolerance = (K2_TOLERANCE_MC if mc is not None else K2_TOLERANCE) * abs(expected.k2)
        evidence.append(Evidence("order", order, target, order_tolerance))
        evidence.append(Evidence("K2", k2, expected.k2, max(k2_tolerance, CONSTANT_TOLERANCE)))
        verdict = Verdict.PASS if evidence[0].holds and evidence[1].holds else Verdict.FAIL

    report = AuditReport(Axiom.ASYMPTOTIC_HOMOGENEITY, verdict, evidence, notes=notes, fitted_order=order,
                         fitted_k1=k1, fitted_k2=k2)
    logging.info(f"{query}: {report}, order {order}, K1 {k1}, K2 {k2}")
    return HomogeneityFit(report, k1, k2, order)
