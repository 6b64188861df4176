#!/usr/bin/env python3
"""
Test configuration parsing, layering and the preset catalogue.
"""

import sys
import json
import math
import tempfile
import pytest
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_T_GRID,
    EXPERIMENT_NAMES,
    ConfigError,
    ExperimentCatalog,
    ExperimentConfig,
    apply_layer,
    build_config,
    changed_keys,
    coerce,
    config_from_values,
    load_config_file,
    parse_config_text,
    parse_t_grid,
    resolve_p,
)


def write_catalog(directory: str, experiments: dict) -> str:
    path = Path(directory) / "catalog.json"
    path.write_text(json.dumps({"experiments": experiments, "metadata": {"version": "test"}}))
    return str(path)


class TestParsing:
    """Test flat key = value parsing and typed coercion"""

    def test_coerce_types(self):
        assert coerce("n", "40") == 40
        assert coerce("p", "0.25") == 0.25
        assert coerce("norm_event", "off") is False
        assert coerce("overlap_sizes", "20, 4,4") == (20, 4, 4)
        assert coerce("families", "gaussian, pm1") == ("gaussian", "pm1")

    def test_coerce_passes_typed_values(self):
        assert coerce("n", 40) == 40
        assert coerce("overlap_sizes", [3, 2]) == (3, 2)

    def test_coerce_errors(self):
        with pytest.raises(ConfigError, match="unknown"):
            coerce("colour", "red")
        with pytest.raises(ConfigError, match="invalid value"):
            coerce("n", "forty")
        with pytest.raises(ConfigError):
            coerce("norm_event", "maybe")

    def test_config_text(self):
        text = """
        # smallest run
        n = 20
        p = 0.3   # dense enough
        trials=5
        """
        assert parse_config_text(text) == {"n": 20, "p": 0.3, "trials": 5}

    def test_config_text_errors(self):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config_text("n 20")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("n = 20\nn = 30")
        with pytest.raises(ConfigError, match="unknown"):
            parse_config_text("size = 20")

    def test_load_config_file(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.conf"
            path.write_text("experiment = zero-prob\nn = 30\n")
            assert load_config_file(str(path)) == {"experiment": "zero-prob", "n": 30}

    def test_t_grid(self):
        assert parse_t_grid("1e-3, 1e-2") == (1e-3, 1e-2)
        grid = parse_t_grid("logspace:-4:0:5")
        assert len(grid) == 5
        assert grid[0] == pytest.approx(1e-4)
        assert grid[-1] == pytest.approx(1.0)

    def test_resolve_p(self):
        n = 500
        assert resolve_p(n, "log") == pytest.approx(math.log(n) / n)
        assert resolve_p(n, "2log") == pytest.approx(2 * math.log(n) / n)
        assert resolve_p(n, "2*log") == pytest.approx(2 * math.log(n) / n)
        assert resolve_p(n, "10") == pytest.approx(10 / n)
        with pytest.raises(ConfigError):
            coerce("pn", "lots")


class TestExperimentConfig:
    """Test validation of the typed configuration"""

    def base(self, **extra):
        values = {"experiment": "zero-prob", "n": 30, "p": 0.1, "trials": 10}
        values.update(extra)
        return values

    def test_defaults(self):
        cfg = config_from_values(self.base())
        assert cfg.model.beta == 1
        assert cfg.model.seed == 0
        assert cfg.chunk_size == DEFAULT_CHUNK_SIZE
        assert cfg.t_grid == DEFAULT_T_GRID
        assert cfg.svd_method == "lapack"
        assert cfg.option("sigma") == 3.0

    def test_pn_resolves_with_n(self):
        cfg = config_from_values({"experiment": "zero-prob", "n": 100, "pn": "log", "trials": 1})
        assert cfg.model.p == pytest.approx(math.log(100) / 100)

    def test_missing_and_conflicting_keys(self):
        with pytest.raises(ConfigError, match="'trials'"):
            config_from_values({"experiment": "zero-prob", "n": 10, "p": 0.1})
        with pytest.raises(ConfigError, match="either"):
            config_from_values(self.base(pn="log"))
        with pytest.raises(ConfigError, match="'p'"):
            config_from_values({"experiment": "zero-prob", "n": 10, "trials": 1})

    @pytest.mark.parametrize("extra", [
        {"experiment": "everything"},
        {"trials": 0},
        {"workers": 0},
        {"chunk_size": 0},
        {"checkpoint_every": 0},
        {"t_grid": (1e-2, 1e-3)},
        {"t_grid": (-1.0,)},
        {"t_grid": ()},
        {"svd_method": "qr"},
        {"fixed_input": "diagonal"},
        {"families": ("sparse", "plaid")},
        {"representatives": ("T9",)},
        {"net_kind": "N4"},
        {"audit_cap": "loose"},
        {"max_weight_length": 17},
        {"sigma": 0.0},
        {"p": 1.5},
        {"beta": 0},
    ])
    def test_invalid_values(self, extra):
        with pytest.raises(ConfigError):
            config_from_values(self.base(**extra))

    def test_identity_ignores_execution_settings(self):
        a = config_from_values(self.base(workers=1, checkpoint_every=2))
        b = config_from_values(self.base(workers=4, checkpoint_every=9, out="elsewhere.json"))
        assert a.identity() == b.identity()
        assert list(changed_keys(a, b)) == []

    def test_changed_keys(self):
        a = config_from_values(self.base())
        b = config_from_values(self.base(trials=11, chunk_size=3))
        assert list(changed_keys(a, b)) == ["chunk_size", "trials"]

    def test_dict_round_trip(self):
        cfg = config_from_values(self.base(beta=2, families=("gaussian",), c_hg=2.0))
        again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg

    def test_values_round_trip(self):
        cfg = config_from_values(self.base(seed=7, gamma=3.0))
        assert config_from_values(cfg.to_values()) == cfg

    def test_from_dict_errors(self):
        with pytest.raises(ConfigError, match="incomplete"):
            ExperimentConfig.from_dict({"experiment": "zero-prob"})
        data = config_from_values(self.base()).to_dict()
        data["model"]["p"] = 2.0
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)


class TestLayering:
    """Test preset, file and flag layering"""

    def test_later_layers_win(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            catalog = ExperimentCatalog(write_catalog(temp_dir, {
                "small": {"experiment": "zero-prob", "description": "small",
                          "settings": {"n": 30, "p": 0.1, "trials": 100, "seed": 1}},
            }))
            cfg = build_config("small", {"trials": 50, "seed": 2}, {"seed": 3, "workers": None}, catalog)
            assert cfg.experiment == "zero-prob"
            assert cfg.trials == 50
            assert cfg.model.seed == 3
            assert cfg.workers == 1

    def test_p_and_pn_replace_each_other(self):
        values = {"n": 100, "p": 0.1}
        apply_layer(values, {"pn": "log"})
        assert "p" not in values and values["pn"] == "log"
        apply_layer(values, {"p": "0.2"})
        assert values == {"n": 100, "p": 0.2}

    def test_kind_name_needs_no_catalog(self):
        cfg = build_config("zero-prob", overrides={"n": 10, "p": 0.2, "trials": 3})
        assert cfg.model.n == 10

    def test_unknown_name(self):
        with pytest.raises(ConfigError, match="neither"):
            build_config("nothing", overrides={"n": 10, "p": 0.2, "trials": 3})

    def test_file_cannot_switch_experiment(self):
        with pytest.raises(ConfigError, match="requested"):
            build_config("zero-prob", {"experiment": "smin-tail"}, {"n": 10, "p": 0.2, "trials": 3})

    def test_missing_catalog_becomes_config_error(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            catalog = ExperimentCatalog(str(Path(temp_dir) / "absent.json"))
            with pytest.raises(ConfigError, match="not found"):
                build_config("small", catalog=catalog)


class TestCatalog:
    """Test catalogue loading and validation"""

    def test_shipped_catalog_is_valid(self):
        path = Path(__file__).parent.parent / "experiments.json"
        catalog = ExperimentCatalog(str(path)).load()
        assert catalog["experiments"]
        for name, preset in catalog["experiments"].items():
            assert preset["experiment"] in EXPERIMENT_NAMES, name

    def test_shipped_presets_build(self):
        path = Path(__file__).parent.parent / "experiments.json"
        catalog = ExperimentCatalog(str(path))
        for name in catalog.load()["experiments"]:
            cfg = build_config(name, catalog=catalog)
            assert cfg.trials >= 1

    def test_accuracy_presets_use_jacobi(self):
        path = Path(__file__).parent.parent / "experiments.json"
        catalog = ExperimentCatalog(str(path))
        for name in ("acceptance-5-beta1", "acceptance-5-beta2", "distance-diagnostic-small"):
            assert build_config(name, catalog=catalog).svd_method == "jacobi", name
        assert build_config("acceptance-4", catalog=catalog).svd_method == "lapack"

    @pytest.mark.parametrize("experiments,message", [
        ({"x": {"description": "no kind"}}, "missing required field"),
        ({"x": {"experiment": "fly", "description": "d"}}, "unknown experiment"),
        ({"x": {"experiment": "zero-prob", "description": "d", "settings": {"size": 3}}}, "unknown key"),
    ])
    def test_invalid_presets(self, experiments, message):
        with tempfile.TemporaryDirectory() as temp_dir:
            with pytest.raises(ValueError, match=message):
                ExperimentCatalog(write_catalog(temp_dir, experiments)).load()

    def test_invalid_json(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "broken.json"
            path.write_text("{not json")
            with pytest.raises(ValueError, match="Invalid JSON"):
                ExperimentCatalog(str(path)).load()

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            ExperimentCatalog("/nonexistent/catalog.json").load()
