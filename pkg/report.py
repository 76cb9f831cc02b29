import argparse
import logging
import time
from pathlib import Path

from src.spatialrisk.config import list_scenarios, model_from_options, region_from_options, threshold_from_options
from src.spatialrisk.errors import SpatialRiskError
from src.spatialrisk.extremal import extremal_coefficient_limit
from src.spatialrisk.risk import RiskKind, RiskQuery, limiting_risk_measure, risk_curve, sigma_squared

REPORT_LAMBDAS = [1.0, 5.0, 10.0]


def _format(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.6g}"


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description='Create report on the variance of the excess fraction per scenario.')
    parser.add_argument('-s', '--scenario-dir', required=True, help='path to the scenario directory')
    parser.add_argument('-v', '--verbose', action='store_true', help='enable verbose logging')
    args = parser.parse_args()

    logging.basicConfig(format="%(message)s", level=(logging.DEBUG if args.verbose else logging.WARNING))
    scenarios = list_scenarios(Path(args.scenario_dir))

    print(f"As of {time.strftime('%Y-%m-%d')}, {len(scenarios)} scenarios are described in {args.scenario_dir}:")
    print()
    print('| Scenario | Model | Θ(∞) | R2 limit | σ² | R2(λ=1) | R2(λ=5) | R2(λ=10) |')
    print('|----------|-------|------|----------|----|---------|---------|----------|')
    for scenario in scenarios:
        options = scenario.options()
        try:
            model = model_from_options(options)
            u = threshold_from_options(options)
            curve = risk_curve(RiskQuery(model, region_from_options(options), u, RiskKind.VARIANCE), REPORT_LAMBDAS)
        except SpatialRiskError as e:
            logging.error(f"skipping {scenario}: {e}")
            continue

        try:
            sigma2 = sigma_squared(model, u)
        except SpatialRiskError:
            sigma2 = None

        values = ' | '.join(_format(value) for value in curve.values)
        print(f"| {scenario.title()} | `{model}` | {_format(extremal_coefficient_limit(model))}"
              f" | {_format(limiting_risk_measure(model, u))} | {_format(sigma2)} | {values} |")
    print()
    print('This table has been generated by [report.py](/report.py).')
