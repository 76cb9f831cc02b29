from pathlib import Path

import numpy as np
import pytest

from src.spatialrisk.config import (
    Command,
    OutputFormat,
    RunConfig,
    ScenarioFile,
    list_scenarios,
    model_from_options,
    parse_grid,
    parse_sigma_mat,
    parse_vectors,
    region_from_options,
    settings_from_options,
    threshold_from_options,
)
from src.spatialrisk.errors import ConfigError
from src.spatialrisk.extremal import GeometricGaussian, Smith, Tube
from src.spatialrisk.geometry import Shape
from src.spatialrisk.risk import RiskKind

SCENARIOS_DIR = Path(__file__).parent.parent / "scenarios"


class TestParsers:
    def test_grid(self):
        assert parse_grid("0.1:0.5:0.1") == [0.1, 0.2, 0.3, 0.4, 0.5]
        assert parse_grid("1,2.5,4") == [1.0, 2.5, 4.0]
        assert parse_grid(3) == [3.0]
        assert len(parse_grid("0.1:30:0.1")) == 300

    @pytest.mark.parametrize("text", ["a:b:c", "1:0:1", "0:1:0", "1:2"])
    def test_invalid_grid(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)

    def test_sigma_mat(self):
        assert parse_sigma_mat("I") == 1.0
        assert parse_sigma_mat(2) == 2.0
        assert np.array_equal(parse_sigma_mat("4,0;0,1"), np.array([[4.0, 0.0], [0.0, 1.0]]))
        with pytest.raises(ConfigError):
            parse_sigma_mat("4,x;0,1")

    def test_vectors(self):
        assert parse_vectors("5,-3;0,0") == [(5.0, -3.0), (0.0, 0.0)]
        with pytest.raises(ConfigError):
            parse_vectors("5")


class TestBuilders:
    def test_models(self):
        assert model_from_options({"model": "smith", "sigma_mat": "4,0;0,1"}) == Smith([[4.0, 0.0], [0.0, 1.0]])
        assert model_from_options({"model": "tube", "r_b": 2.0}) == Tube(2.0)
        model = model_from_options({"model": "geometric-gaussian", "sigma_eps": 2.0, "corr": "cauchy"})
        assert isinstance(model, GeometricGaussian) and model.sigma_eps == 2.0

    @pytest.mark.parametrize("options", [{}, {"model": "storm"}, {"model": "geometric-gaussian"},
                                         {"model": "schlather", "corr": "gaussian"}])
    def test_invalid_models(self, options):
        with pytest.raises(ConfigError):
            model_from_options(options)

    def test_region(self):
        region = region_from_options({"region": "square", "R": 2, "center": "1,2"})
        assert region.shape is Shape.SQUARE and region.r == 2.0 and region.center == (1.0, 2.0)
        with pytest.raises(ConfigError):
            region_from_options({"region": "hexagon"})

    def test_threshold(self):
        assert threshold_from_options({"u": 2.0}) == 2.0
        assert threshold_from_options({"u1": 1.0, "mu": 0.0, "sigma": 1.0, "xi": 1.0}) == pytest.approx(2.0)
        with pytest.raises(ConfigError):
            threshold_from_options({"u": -1.0})

    def test_settings(self):
        settings = settings_from_options({"M": 49, "S": 100, "seed": 3, "alpha": 0.95})
        assert (settings.m_per_unit, settings.replicates, settings.seed, settings.alpha) == (7, 100, 3, 0.95)
        assert settings_from_options({"M": 50}).m_per_unit == 7
        with pytest.raises(ConfigError):
            settings_from_options({"S": 0})


class TestRunConfig:
    def test_from_options(self):
        config = RunConfig.from_options("curve", {"lambda": "1:3:1", "format": "json", "output": "out.json"})
        assert config.command is Command.CURVE
        assert config.format is OutputFormat.JSON
        assert config.lambdas == [1.0, 2.0, 3.0]
        assert config.output == Path("out.json")
        assert config.kind() is RiskKind.VARIANCE

    def test_rejects_non_positive_lambdas(self):
        with pytest.raises(ConfigError):
            RunConfig.from_options("curve", {"lambda": "0,1"})

    def test_rejects_unknown_kinds(self):
        with pytest.raises(ConfigError):
            RunConfig.from_options("curve", {"kind": "mean"}).kind()


class TestScenarioFile:
    def test_markdown_front_matter(self, tmp_path):
        path = tmp_path / "tube.md"
        path.write_text("---\ntitle: Tube\nmodel: tube\nr-b: 0.5\nlambda: \"1:3:1\"\n---\n\nSome notes.\n")
        scenario = ScenarioFile(path)
        assert scenario.title() == "Tube"
        assert scenario.options() == {"model": "tube", "r_b": 0.5, "lambda": "1:3:1"}
        assert scenario.notes.strip() == "Some notes."

    def test_yaml(self, tmp_path):
        path = tmp_path / "smith.yaml"
        path.write_text("model: smith\nu: 2\n")
        assert ScenarioFile(path).options() == {"model": "smith", "u": 2}

    def test_invalid_files(self, tmp_path):
        with pytest.raises(ConfigError):
            ScenarioFile(tmp_path / "missing.yaml")
        path = tmp_path / "list.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ConfigError):
            ScenarioFile(path)
        path = tmp_path / "broken.yaml"
        path.write_text("model: [smith\n")
        with pytest.raises(ConfigError):
            ScenarioFile(path)

    def test_shipped_scenarios_are_valid(self):
        scenarios = list_scenarios(SCENARIOS_DIR)
        assert len(scenarios) >= 10
        for scenario in scenarios:
            options = scenario.options()
            model_from_options(options)
            region_from_options(options)
            assert threshold_from_options(options) > 0
            assert parse_grid(options["lambda"])

    def test_single_scenario(self):
        assert [s.name for s in list_scenarios(SCENARIOS_DIR, "smith")] == ["smith"]
