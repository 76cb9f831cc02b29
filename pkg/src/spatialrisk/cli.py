import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .artifacts import THETA_HEADER, JsonArtifact, TableArtifact, diff_artifacts, format_number
from .audit import (
    audit_asymptotic_homogeneity,
    audit_subadditivity,
    audit_translation_invariance,
    audit_union_subadditivity,
)
from .config import Command, OutputFormat, RunConfig, ScenarioFile, parse_grid, parse_vectors
from .errors import ConfigError, SpatialRiskError
from .extremal import extremal_coefficient_limit, is_mixing, pairwise_extremal_coefficient
from .risk import (
    RiskKind,
    RiskQuery,
    homogeneity_constants_var,
    homogeneity_constants_variance,
    limiting_risk_measure,
    risk_curve,
    sigma_squared,
)
from .simulation import GridSpec, loss_sample, render_raster, simulate_field, write_raster
from .workers import worker_count

"""Command-line front end: every subcommand writes one artifact, to --output or to stdout.

Exit status: 0 on success, 1 when `diff` finds differences, 2 on configuration errors and 3 on numeric
errors. Failures also print a JSON error record on stderr.
"""

CONFIG_EXIT_STATUS = 2
NUMERIC_EXIT_STATUS = 3


class SpatialRiskParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise ConfigError(message)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=None, help="enable verbose logging")
    common.add_argument("--config", help="YAML file or Markdown scenario whose keys provide option defaults")
    common.add_argument("--output", help="artifact path (default: stdout)")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], help="table format (default: csv)")
    return common


def _model_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--model", help="smith, schlather, geometric-gaussian, brown-resnick, tube,"
                                       " perfect-dependence or independence")
    group.add_argument("--sigma-mat", dest="sigma_mat", help="Smith covariance: I, a scalar or rows like 4,0;0,1")
    group.add_argument("--corr", help="correlation family: whittle-matern, cauchy or powered-exponential")
    group.add_argument("--c1", type=float, help="correlation range")
    group.add_argument("--c2", type=float, help="correlation smoothness or shape")
    group.add_argument("--sigma-eps", dest="sigma_eps", type=float, help="geometric Gaussian standard deviation")
    group.add_argument("--eta", type=float, help="Brown-Resnick semivariogram scale")
    group.add_argument("--a", type=float, help="Brown-Resnick semivariogram exponent in (0, 2]")
    group.add_argument("--r-b", dest="r_b", type=float, help="tube radius")


def _region_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("region")
    group.add_argument("--region", choices=["disk", "square"], help="region shape (default: disk)")
    group.add_argument("--R", type=float, help="disk radius or square side (default: 1)")
    group.add_argument("--center", help="region center as x,y (default: 0,0)")


def _threshold_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("threshold")
    group.add_argument("--u", type=float, help="threshold on the standard Fréchet scale (default: 1)")
    group.add_argument("--u1", type=float, help="threshold on the GEV scale, converted with --mu/--sigma/--xi")
    group.add_argument("--mu", type=float, help="GEV location")
    group.add_argument("--sigma", type=float, help="GEV scale")
    group.add_argument("--xi", type=float, help="GEV shape")


def _grid_options(parser: argparse.ArgumentParser, required: bool = False) -> None:
    parser.add_argument("--lambda", dest="lambda", help="λ grid: start:stop:step (inclusive) or a comma-separated list"
                        + (" (required)" if required else ""))


def _mc_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("Monte-Carlo")
    group.add_argument("--M", type=int, help="grid sites in the unit region, a perfect square (default: 49)")
    group.add_argument("--S", type=int, help="number of replicates (default: 10000)")
    group.add_argument("--seed", type=int, help="random seed (default: 42)")
    group.add_argument("--alpha", type=float, help="VaR level (default: 0.9)")
    group.add_argument("--envelope-tail", dest="envelope_tail", type=float,
                       help="tail mass above the spectral envelope (default: 4e-4)")
    group.add_argument("--max-storms", dest="max_storms", type=int, help="storm budget per field (default: 200000)")
    group.add_argument("--strict", action="store_true", default=None,
                       help="fail instead of warning when the storm budget is exhausted")


def build_parser() -> tuple[SpatialRiskParser, dict[str, argparse.ArgumentParser]]:
    parser = SpatialRiskParser(prog="spatial-risk", description="Spatial risk measures of max-stable fields.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    commands = {}

    def add(command: Command, help_text: str) -> argparse.ArgumentParser:
        subparser = subparsers.add_parser(command.value, parents=[common], help=help_text, description=help_text)
        commands[command.value] = subparser
        return subparser

    curve = add(Command.CURVE, "risk measure of λA over a λ grid, by quadrature")
    _model_options(curve)
    _region_options(curve)
    _threshold_options(curve)
    _grid_options(curve, required=True)
    curve.add_argument("--kind", choices=[k.value for k in RiskKind], help="risk measure (default: variance)")
    curve.add_argument("--alpha", type=float, help="VaR level, Gaussian approximation (default: 0.9)")

    limit = add(Command.LIMIT, "limiting variance of the excess fraction when λ -> ∞")
    _model_options(limit)
    _threshold_options(limit)

    sigma = add(Command.SIGMA, "σ² and the asymptotic homogeneity constants")
    _model_options(sigma)
    _region_options(sigma)
    _threshold_options(sigma)
    sigma.add_argument("--alpha", type=float, help="also give the VaR constants at this level")

    var_curve = add(Command.VAR_CURVE, "empirical VaR of λA over a λ grid, by simulation")
    _model_options(var_curve)
    _region_options(var_curve)
    _threshold_options(var_curve)
    _grid_options(var_curve, required=True)
    _mc_options(var_curve)

    simulate = add(Command.SIMULATE, "one field realization on the grid over λA, as an ESRI ASCII raster")
    _model_options(simulate)
    _region_options(simulate)
    _threshold_options(simulate)
    _grid_options(simulate)
    _mc_options(simulate)
    simulate.add_argument("--replicate", type=int, help="replicate index (default: 0)")

    audit = add(Command.AUDIT, "numeric audit of an axiom of spatial risk measures")
    _model_options(audit)
    _region_options(audit)
    _threshold_options(audit)
    _grid_options(audit)
    _mc_options(audit)
    audit.add_argument("--axiom", choices=["translation", "subadditivity", "union", "homogeneity"],
                       help="axiom to audit (default: subadditivity)")
    audit.add_argument("--kind", choices=[k.value for k in RiskKind], help="risk measure (default: variance)")
    audit.add_argument("--translations", help="translation vectors for the translation and union audits: x,y;x,y")
    audit.add_argument("--monte-carlo", dest="monte_carlo", action="store_true", default=None,
                       help="evaluate risks by simulation instead of quadrature")

    transform = add(Command.TRANSFORM_THRESHOLD, "standard Fréchet threshold equivalent to u1 under GEV margins")
    _threshold_options(transform)

    theta = add(Command.THETA, "extremal coefficient over a distance grid")
    _model_options(theta)
    theta.add_argument("--h", help="distance grid: start:stop:step (default: 0:5:0.1)")

    diff = add(Command.DIFF, "compare two artifacts")
    diff.add_argument("first", nargs="?", help="reference artifact")
    diff.add_argument("second", nargs="?", help="artifact to compare")
    diff.add_argument("--significant-digits", dest="significant_digits", type=int,
                      help="numeric precision of the comparison (default: 10)")

    return parser, commands


def parse_options(argv: list[str] | None = None) -> tuple[str, dict]:
    """Command name and options; values from --config only fill in flags left unset."""
    parser, commands = build_parser()
    args = parser.parse_args(argv)

    if args.config:
        scenario = ScenarioFile(Path(args.config))
        subparser = commands[args.command]
        known = {action.dest for action in subparser._actions}
        options = scenario.options()
        for key in sorted(set(options) - known):
            logging.warning(f"ignoring unknown option '{key}' from {scenario}")
        subparser.set_defaults(**{key: value for key, value in options.items() if key in known})
        args = parser.parse_args(argv)

    options = vars(args)
    return options.pop("command"), options


def _curve(config: RunConfig) -> int:
    if not config.lambdas:
        msg = "curve needs a λ grid (--lambda)"
        raise ConfigError(msg)

    kind = config.kind()
    alpha = float(config.options.get("alpha") or 0.9) if kind is RiskKind.VAR else None
    query = RiskQuery(config.model(), config.region(), config.threshold(), kind, alpha)
    curve = risk_curve(query, config.lambdas, workers=worker_count())
    for note in curve.notes:
        logging.warning(note)

    with TableArtifact(config.output, json_format=config.format is OutputFormat.JSON) as artifact:
        artifact.add_curve(curve)
    return 0


def _limit(config: RunConfig) -> int:
    model, u = config.model(), config.threshold()
    with JsonArtifact(config.output, "limit") as artifact:
        artifact.data = {
            "model": model.to_dict(),
            "u": u,
            "theta_limit": extremal_coefficient_limit(model),
            "mixing": is_mixing(model),
            "limit": limiting_risk_measure(model, u),
        }
    return 0


def _sigma(config: RunConfig) -> int:
    model, region, u = config.model(), config.region(), config.threshold()
    sigma2 = sigma_squared(model, u)
    with JsonArtifact(config.output, "sigma") as artifact:
        k1, k2, order = homogeneity_constants_variance(model, region, u, sigma2)
        artifact.data = {
            "model": model.to_dict(),
            "region": region.to_dict(),
            "u": u,
            "sigma_squared": sigma2,
            "variance": {"K1": k1, "K2": k2, "order": order},
        }
        alpha = config.options.get("alpha")
        if alpha is not None:
            k1, k2, order = homogeneity_constants_var(model, region, u, alpha, sigma2)
            artifact.data["var"] = {"alpha": alpha, "K1": k1, "K2": k2, "order": order}
    return 0


def _var_curve(config: RunConfig) -> int:
    if not config.lambdas:
        msg = "var-curve needs a λ grid (--lambda)"
        raise ConfigError(msg)

    settings = config.settings()
    query = RiskQuery(config.model(), config.region(), config.threshold(), RiskKind.VAR, settings.alpha)
    curve = risk_curve(query, config.lambdas, settings, worker_count())
    with TableArtifact(config.output, json_format=config.format is OutputFormat.JSON) as artifact:
        artifact.add_curve(curve)
    return 0


def _simulate(config: RunConfig) -> int:
    settings = config.settings()
    lambda_ = config.lambdas[0] if config.lambdas else 1.0
    grid = GridSpec(config.region(), lambda_, settings.m_per_unit)
    field = simulate_field(config.model(), grid, settings.seed, int(config.options.get("replicate") or 0), settings)
    logging.info(f"{field.model} on {grid}: truncation {field.truncation_report},"
                 f" loss {loss_sample(field, config.threshold()).l_n}")

    if config.output is None:
        sys.stdout.write(render_raster(field))
    else:
        write_raster(field, config.output)
    return 0


def _audit(config: RunConfig) -> int:
    kind = config.kind()
    settings = config.settings()
    alpha = settings.alpha if kind is RiskKind.VAR else None
    query = RiskQuery(config.model(), config.region(), config.threshold(), kind, alpha)
    # VaR axioms are only checked against simulated quantiles
    mc = settings if config.options.get("monte_carlo") or kind is RiskKind.VAR else None
    axiom = config.options.get("axiom") or "subadditivity"
    translations = parse_vectors(config.options.get("translations") or "5,-3")

    if axiom == "translation":
        report = audit_translation_invariance(query, translations, mc, worker_count())
    elif axiom == "union":
        report = audit_union_subadditivity(query, query.region, query.region.translate(translations[0]))
    elif axiom == "homogeneity":
        lambdas = config.lambdas or parse_grid("10:100:10")
        report = audit_asymptotic_homogeneity(query, lambdas, mc, worker_count()).report
    else:
        lambdas = config.lambdas or parse_grid("1:10:1")
        report = audit_subadditivity(query, lambdas, mc, worker_count())

    with JsonArtifact(config.output, "audit") as artifact:
        artifact.data = report.to_dict()
    return 0


def _transform_threshold(config: RunConfig) -> int:
    u = config.threshold()
    if config.format is OutputFormat.JSON:
        with JsonArtifact(config.output, "threshold") as artifact:
            artifact.data = {"u": u}
    elif config.output is None:
        print(format_number(u))
    else:
        config.output.write_text(format_number(u) + "\n", encoding="utf-8")
    return 0


def _theta(config: RunConfig) -> int:
    model = config.model()
    distances = np.array(parse_grid(config.options.get("h") or "0:5:0.1"))
    offsets = np.column_stack([distances, np.zeros_like(distances)])
    theta = np.atleast_1d(pairwise_extremal_coefficient(model, offsets, np.zeros(2)))

    with TableArtifact(config.output, THETA_HEADER, config.format is OutputFormat.JSON, "theta") as artifact:
        for h, value in zip(distances, theta, strict=True):
            artifact.add(float(h), float(value))
    return 0


def _diff(config: RunConfig) -> int:
    first, second = config.options.get("first"), config.options.get("second")
    if not first or not second:
        msg = "diff needs two artifact paths"
        raise ConfigError(msg)

    significant_digits = config.options.get("significant_digits")
    diff = diff_artifacts(Path(first), Path(second), 10 if significant_digits is None else significant_digits)
    if diff:
        print(diff.pretty())
        return 1
    return 0


HANDLERS = {
    Command.CURVE: _curve,
    Command.LIMIT: _limit,
    Command.SIGMA: _sigma,
    Command.VAR_CURVE: _var_curve,
    Command.SIMULATE: _simulate,
    Command.AUDIT: _audit,
    Command.TRANSFORM_THRESHOLD: _transform_threshold,
    Command.THETA: _theta,
    Command.DIFF: _diff,
}


def run(config: RunConfig) -> int:
    logging.debug(f"running {config}")
    return HANDLERS[config.command](config)


def _report_error(error: Exception, exit_status: int) -> int:
    record = {"error": type(error).__name__, "message": str(error), "exit_status": exit_status}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return exit_status


def main(argv: list[str] | None = None) -> int:
    try:
        command, options = parse_options(argv)
        # Do not update the format: artifacts go to stdout and logs must stay plain on stderr.
        logging.basicConfig(format="%(message)s", level=(logging.DEBUG if options.get("verbose") else logging.INFO))
        return run(RunConfig.from_options(command, options))
    except ConfigError as e:
        return _report_error(e, CONFIG_EXIT_STATUS)
    except SpatialRiskError as e:
        logging.debug("numeric failure", exc_info=e)
        return _report_error(e, NUMERIC_EXIT_STATUS)
