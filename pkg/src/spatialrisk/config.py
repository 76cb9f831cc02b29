import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import frontmatter
import numpy as np
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from .errors import ConfigError, ParameterError
from .extremal import ExtremalModel, model_from_dict
from .geometry import Region, Shape
from .risk import GevParams, RiskKind, gev_to_frechet_threshold
from .simulation import MonteCarloSettings

"""Run configurations, from command-line flags and from scenario files.

Scenario files are YAML documents or Markdown files with a YAML front matter; their keys are the flag
names with dashes replaced by underscores and act as defaults for the flags.
"""

SCENARIO_SUFFIXES = (".md", ".yaml", ".yml")
GRID_LIMIT = 100_000


def _option(options: dict, key: str, default: object) -> object:
    value = options.get(key)
    return default if value is None else value


class Command(Enum):
    CURVE = "curve"
    LIMIT = "limit"
    SIGMA = "sigma"
    VAR_CURVE = "var-curve"
    SIMULATE = "simulate"
    AUDIT = "audit"
    TRANSFORM_THRESHOLD = "transform-threshold"
    THETA = "theta"
    DIFF = "diff"


class OutputFormat(Enum):
    CSV = "csv"
    JSON = "json"


class ScenarioFile:
    def __init__(self, path: Path) -> None:
        self.path: Path = path
        self.name: str = path.stem
        self.notes: str = ""

        if not self.path.is_file():
            msg = f"no scenario file at {self.path}"
            raise ConfigError(msg)

        try:
            with self.path.open(encoding="utf-8") as f:
                if self.path.suffix == ".md":
                    post = frontmatter.load(f)
                    data, self.notes = dict(post.metadata), post.content
                else:
                    data = YAML(typ="safe").load(f) or {}
        except YAMLError as e:
            msg = f"invalid YAML in {self.path}: {e}"
            raise ConfigError(msg) from e

        if not isinstance(data, dict):
            msg = f"{self.path} must hold a mapping of option names to values, got {type(data).__name__}"
            raise ConfigError(msg)
        self.data: dict = {key.replace("-", "_"): value for key, value in data.items()}
        logging.debug(f"loaded scenario {self.name} from {self.path}")

    def title(self) -> str:
        return self.data.get("title", self.name)

    def options(self) -> dict:
        """Option values, without the descriptive keys."""
        return {key: value for key, value in self.data.items() if key not in ("title", "description")}

    def __repr__(self) -> str:
        return f"scenario {self.name}"


def list_scenarios(scenarios_dir: Path, scenario_name: str | None = None) -> list[ScenarioFile]:
    if scenario_name:
        paths = [scenarios_dir / f"{scenario_name}.md"]
    else:
        paths = sorted(p for p in scenarios_dir.iterdir() if p.suffix in SCENARIO_SUFFIXES)

    scenarios = []
    for path in paths:
        try:
            scenarios.append(ScenarioFile(path))
        except ConfigError as e:
            logging.exception(f"failed to load scenario {path}: {e}")
    return scenarios


def parse_grid(text: str | float | list) -> list[float]:
    """'start:stop:step' (both ends included), a comma-separated list or a single value."""
    if isinstance(text, int | float):
        return [float(text)]
    if isinstance(text, list):
        return [float(value) for value in text]

    text = str(text).strip()
    try:
        if ":" not in text:
            return [float(value) for value in text.split(",") if value.strip()]
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError as e:
        msg = f"invalid grid '{text}': expected start:stop:step or a comma-separated list"
        raise ConfigError(msg) from e

    if not step > 0 or stop < start:
        msg = f"invalid grid '{text}': step must be positive and stop >= start"
        raise ConfigError(msg)
    count = math.floor((stop - start) / step + 1e-9) + 1
    if count > GRID_LIMIT:
        msg = f"grid '{text}' has {count} points, more than {GRID_LIMIT}"
        raise ConfigError(msg)
    # computed from the index so that rounding does not accumulate along the grid
    return [round(start + k * step, 12) for k in range(count)]


def parse_sigma_mat(text: str | float | list) -> np.ndarray | float:
    """'I', a scalar multiple of the identity or rows separated by ';' ('4,0;0,1')."""
    if isinstance(text, int | float):
        return float(text)
    if isinstance(text, list):
        return np.array(text, dtype=float)

    text = str(text).strip()
    if text.upper() == "I":
        return 1.0
    try:
        if ";" not in text:
            return float(text)
        return np.array([[float(value) for value in row.split(",")] for row in text.split(";")])
    except ValueError as e:
        msg = f"invalid covariance matrix '{text}': expected I, a scalar or rows like 4,0;0,1"
        raise ConfigError(msg) from e


def parse_vectors(text: str | list) -> list[tuple[float, float]]:
    """'5,-3;0,0' or a list of pairs."""
    if isinstance(text, list):
        pairs = text
    else:
        pairs = [part.split(",") for part in str(text).split(";") if part.strip()]
    try:
        vectors = [(float(x), float(y)) for x, y in pairs]
    except ValueError as e:
        msg = f"invalid vectors '{text}': expected x,y pairs separated by ';'"
        raise ConfigError(msg) from e
    return vectors


def model_from_options(options: dict) -> ExtremalModel:
    name = options.get("model")
    if not name:
        msg = "no model given"
        raise ConfigError(msg)

    data = {"model": name}
    if name == "smith":
        data["sigma_mat"] = parse_sigma_mat(_option(options, "sigma_mat", "I"))
    elif name in ("schlather", "geometric-gaussian"):
        data["corr"] = {"kind": _option(options, "corr", "whittle-matern"), "c1": _option(options, "c1", 1.0),
                        "c2": _option(options, "c2", 0.5)}
        if options.get("sigma_eps") is not None:
            data["sigma_eps"] = options["sigma_eps"]
    elif name == "brown-resnick":
        data["vario"] = {"eta": _option(options, "eta", 1.0), "a": _option(options, "a", 1.0)}
    elif name == "tube":
        data["r_b"] = _option(options, "r_b", 1.0)

    try:
        return model_from_dict(data)
    except (ParameterError, TypeError, ValueError) as e:
        msg = f"invalid model configuration {data}: {e}"
        raise ConfigError(msg) from e


def region_from_options(options: dict) -> Region:
    try:
        shape = Shape(_option(options, "region", "disk"))
        center = tuple(parse_vectors(options["center"])[0]) if options.get("center") else (0.0, 0.0)
        return Region(shape, float(_option(options, "R", 1.0)), center)
    except (ParameterError, ValueError, IndexError) as e:
        msg = f"invalid region configuration: {e}"
        raise ConfigError(msg) from e


def threshold_from_options(options: dict) -> float:
    """u itself, or the Fréchet-scale image of u1 under GEV(mu, sigma, xi) margins."""
    if options.get("u1") is not None:
        try:
            params = GevParams(float(_option(options, "mu", 0.0)), float(_option(options, "sigma", 1.0)),
                               float(_option(options, "xi", 0.0)))
        except ParameterError as e:
            msg = f"invalid GEV parameters: {e}"
            raise ConfigError(msg) from e
        return gev_to_frechet_threshold(params, float(options["u1"]))

    u = float(_option(options, "u", 1.0))
    if not u > 0:
        msg = f"threshold u must be positive, got {u}"
        raise ConfigError(msg)
    return u


def settings_from_options(options: dict) -> MonteCarloSettings:
    m_per_unit = options.get("m_per_unit")
    if m_per_unit is None:
        sites = int(_option(options, "M", 49))
        m_per_unit = round(math.sqrt(sites))
        if m_per_unit * m_per_unit != sites:
            logging.warning(f"M={sites} is not a square, using {m_per_unit}x{m_per_unit} sites per unit region")

    try:
        return MonteCarloSettings(
            m_per_unit=int(m_per_unit),
            replicates=int(_option(options, "S", 10000)),
            seed=int(_option(options, "seed", 42)),
            alpha=float(_option(options, "alpha", 0.9)),
            envelope_tail=float(_option(options, "envelope_tail", 4e-4)),
            max_storms=int(_option(options, "max_storms", 200_000)),
            strict=bool(options.get("strict")),
        )
    except ParameterError as e:
        msg = f"invalid Monte-Carlo settings: {e}"
        raise ConfigError(msg) from e


@dataclass
class RunConfig:
    command: Command
    options: dict
    output: Path | None = None
    format: OutputFormat = OutputFormat.CSV
    lambdas: list[float] = field(default_factory=list)

    @staticmethod
    def from_options(command: str, options: dict) -> "RunConfig":
        try:
            command = Command(command)
            output_format = OutputFormat(_option(options, "format", "csv"))
        except ValueError as e:
            msg = f"invalid command or format: {e}"
            raise ConfigError(msg) from e

        lambdas = parse_grid(options["lambda"]) if options.get("lambda") is not None else []
        if any(not lambda_ > 0 for lambda_ in lambdas):
            msg = f"λ values must be positive, got {lambdas}"
            raise ConfigError(msg)
        output = Path(options["output"]) if options.get("output") else None
        return RunConfig(command, options, output, output_format, lambdas)

    def model(self) -> ExtremalModel:
        return model_from_options(self.options)

    def region(self) -> Region:
        return region_from_options(self.options)

    def threshold(self) -> float:
        return threshold_from_options(self.options)

    def settings(self) -> MonteCarloSettings:
        return settings_from_options(self.options)

    def kind(self) -> RiskKind:
        try:
            return RiskKind(_option(self.options, "kind", "variance"))
        except ValueError as e:
            msg = f"invalid risk measure: {e}"
            raise ConfigError(msg) from e

    def __repr__(self) -> str:
        return f"{self.command.value}({', '.join(f'{k}={v}' for k, v in sorted(self.options.items()) if v is not None)})"
