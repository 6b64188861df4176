#!/usr/bin/env python3
"""
Experiment configuration for spectra.

A configuration comes from three layers, lowest priority first: a preset of
the experiment catalogue (``experiments.json``), a flat ``key = value`` file,
and command-line flags. Every key has a fixed type; see ``docs/config.md``.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from logging_config import get_logger
from model import ModelError, ModelParams
from probability import ProbabilityConstants, ProbabilityError
from spectral import SVD_METHODS
from structure import REPRESENTATIVE_KINDS, VECTOR_FAMILIES, ClassParams, StructureError
from expansion import AUDIT_CAPS
from nets import COVER_KINDS


EXPERIMENT_NAMES = (
    "smin-tail",
    "corank-census",
    "zero-prob",
    "partition-check",
    "expansion-audit",
    "bounds-audit",
    "t23-anticoncentration",
    "net-audit",
    "distance-diagnostic",
    "minmax-audit",
    "rogozin-audit",
    "event-census",
    "norm-calibration",
)

DEFAULT_CATALOG = "experiments.json"
DEFAULT_T_GRID = tuple(float(t) for t in np.logspace(-14.0, 0.0, 29))
DEFAULT_CHUNK_SIZE = 256
DEFAULT_CHECKPOINT_EVERY = 8
FIXED_INPUTS = ("identity", "zeros", "ones")

# Keys that change how a run is executed but never what it computes.
EXECUTION_KEYS = ("workers", "checkpoint_every", "out", "log_level", "log_dir")


class ConfigError(ValueError):
    """Custom exception for invalid or inconsistent experiment configuration"""
    pass


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{raw}'")


def _parse_int_list(raw: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in raw.replace(" ", "").split(",") if part)


def _parse_str_list(raw: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in raw.split(",") if part.strip())


def parse_t_grid(raw: str) -> Tuple[float, ...]:
    """
    Parse a t grid: comma separated values or ``logspace:<lo>:<hi>:<count>``.

    Raises:
        ValueError: If the text is malformed
    """
    raw = raw.strip()
    if raw.startswith("logspace:"):
        _, lo, hi, count = raw.split(":")
        return tuple(float(t) for t in np.logspace(float(lo), float(hi), int(count)))
    return tuple(float(part) for part in raw.split(",") if part.strip())


def _parse_pn(raw: str) -> str:
    """Keep ``pn`` symbolic until n is known; validate the form now."""
    value = raw.strip().lower()
    number = value[:-3].rstrip("*") if value.endswith("log") else value
    if number:
        float(number)
    return value


def resolve_p(n: int, pn: Any) -> float:
    """
    Turn a ``pn`` value into p. ``log`` means log(n) and ``<c>log`` or
    ``<c>*log`` means c log(n).
    """
    value = str(pn).strip().lower()
    if value.endswith("log"):
        factor = value[:-3].rstrip("*")
        return (float(factor) if factor else 1.0) * math.log(n) / n
    return float(value) / n


KEY_TYPES: Dict[str, Callable[[str], Any]] = {
    # run
    "experiment": str,
    "n": int,
    "p": float,
    "pn": _parse_pn,
    "beta": int,
    "trials": int,
    "seed": int,
    "workers": int,
    "chunk_size": int,
    "checkpoint_every": int,
    "t_grid": parse_t_grid,
    "out": str,
    "svd_method": str,
    "exact_rank_max_n": int,
    "fixed_input": str,
    "sigma": float,
    "log_level": str,
    "log_dir": str,
    # class parameters
    "gamma": float,
    "c_t1": float,
    "c_t2": float,
    "r": float,
    "delta": float,
    "rho": float,
    "phi": float,
    "phi0": float,
    "k_threshold": int,
    # universal constants
    "c_rgz": float,
    "c_hg": float,
    "c_norm": float,
    # experiment options
    "tail_threshold": float,
    "tail_factor": float,
    "subset_trials": int,
    "families": _parse_str_list,
    "representatives": _parse_str_list,
    "m1": int,
    "j1": int,
    "j2": int,
    "support": int,
    "lemma_r": float,
    "overlap_sizes": _parse_int_list,
    "overlap_t": float,
    "net_kind": str,
    "net_l": int,
    "net_a": float,
    "weights": int,
    "max_weight_length": int,
    "lambda_factor": float,
    "anti_threshold": float,
    "audit_trials": int,
    "audit_cap": str,
    "norm_event": _parse_bool,
    "distance_columns": int,
}

CLASS_PARAM_KEYS = ("gamma", "c_t1", "c_t2", "r", "delta", "rho", "phi", "phi0", "k_threshold")
CONSTANT_KEYS = ("c_rgz", "c_hg", "c_norm")

OPTION_DEFAULTS: Dict[str, Any] = {
    "exact_rank_max_n": 60,
    "fixed_input": None,
    "sigma": 3.0,
    "tail_threshold": 1e-12,
    "tail_factor": 2.5,
    "subset_trials": 20,
    "families": VECTOR_FAMILIES,
    "representatives": ("T2prime", "T3profile"),
    "m1": 400,
    "j1": 8,
    "j2": 24,
    "support": 12,
    "lemma_r": 12.0,
    "overlap_sizes": (20, 4, 4, 4, 4),
    "overlap_t": 3.0,
    "net_kind": "T2",
    "net_l": 2,
    "net_a": 1.0,
    "weights": 20,
    "max_weight_length": 12,
    "lambda_factor": 0.6,
    "anti_threshold": 1e-3,
    "audit_trials": 64,
    "audit_cap": "standard",
    "norm_event": True,
    "distance_columns": 0,
}


def coerce(key: str, raw: Any) -> Any:
    """
    Convert one raw value to the type of its key. Non-string values are taken
    as already typed (JSON presets).

    Raises:
        ConfigError: If the key is unknown or the value does not parse
    """
    if key not in KEY_TYPES:
        raise ConfigError(f"unknown configuration key '{key}'")
    if not isinstance(raw, str):
        if isinstance(raw, list):
            return tuple(raw)
        return raw
    try:
        return KEY_TYPES[key](raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value for '{key}': '{raw}' ({e})")


def parse_config_text(text: str, source: str = "<text>") -> Dict[str, Any]:
    """
    Parse flat ``key = value`` lines. ``#`` starts a comment.

    Raises:
        ConfigError: On malformed lines, unknown or duplicate keys
    """
    values: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got '{line}'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{source}:{number}: duplicate key '{key}'")
        values[key] = coerce(key, raw)
    return values


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Read a flat config file.

    Raises:
        OSError: If the file cannot be read
        ConfigError: If its content is invalid
    """
    with open(path, "r") as f:
        return parse_config_text(f.read(), source=path)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; ``options`` holds the experiment-specific keys."""

    experiment: str
    model: ModelParams
    trials: int
    class_params: ClassParams
    constants: ProbabilityConstants = field(default_factory=ProbabilityConstants)
    t_grid: Tuple[float, ...] = DEFAULT_T_GRID
    workers: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY
    output_path: Optional[str] = None
    svd_method: str = "lapack"
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_NAMES:
            raise ConfigError(f"unknown experiment '{self.experiment}', expected one of {EXPERIMENT_NAMES}")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be at least 1, got {self.chunk_size}")
        if self.checkpoint_every < 1:
            raise ConfigError(f"checkpoint_every must be at least 1, got {self.checkpoint_every}")
        grid = np.asarray(self.t_grid, dtype=np.float64)
        if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ConfigError("t_grid must be a nonempty, nonnegative, strictly increasing sequence")
        if self.svd_method not in SVD_METHODS:
            raise ConfigError(f"svd_method must be one of {SVD_METHODS}, got '{self.svd_method}'")
        merged = dict(OPTION_DEFAULTS)
        merged.update(self.options)
        object.__setattr__(self, "options", merged)
        self._check_options()

    def _check_options(self):
        opts = self.options
        if opts["fixed_input"] is not None and opts["fixed_input"] not in FIXED_INPUTS:
            raise ConfigError(f"fixed_input must be one of {FIXED_INPUTS}, got '{opts['fixed_input']}'")
        unknown = [f for f in opts["families"] if f not in VECTOR_FAMILIES]
        if unknown:
            raise ConfigError(f"unknown vector families {unknown}, expected {VECTOR_FAMILIES}")
        unknown = [k for k in opts["representatives"] if k not in REPRESENTATIVE_KINDS]
        if unknown:
            raise ConfigError(f"unknown representative kinds {unknown}, expected {REPRESENTATIVE_KINDS}")
        if opts["net_kind"] not in COVER_KINDS:
            raise ConfigError(f"net_kind must be one of {COVER_KINDS}, got '{opts['net_kind']}'")
        if opts["audit_cap"] not in AUDIT_CAPS:
            raise ConfigError(f"audit_cap must be one of {AUDIT_CAPS}, got '{opts['audit_cap']}'")
        if not 1 <= opts["max_weight_length"] <= 16:
            raise ConfigError("max_weight_length must lie in [1, 16]")
        if opts["sigma"] <= 0:
            raise ConfigError("sigma must be positive")

    def option(self, key: str) -> Any:
        return self.options[key]

    def to_dict(self) -> Dict[str, Any]:
        """Plain, JSON-ready form used in results and checkpoints."""
        return {
            "experiment": self.experiment,
            "model": self.model.to_dict(),
            "trials": self.trials,
            "class_params": self.class_params.to_dict(),
            "constants": self.constants.to_dict(),
            "t_grid": list(self.t_grid),
            "workers": self.workers,
            "chunk_size": self.chunk_size,
            "checkpoint_every": self.checkpoint_every,
            "output_path": self.output_path,
            "svd_method": self.svd_method,
            "options": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.options.items())},
        }

    def identity(self) -> Dict[str, Any]:
        """The part of the configuration that determines the results."""
        data = self.to_dict()
        for key in ("workers", "checkpoint_every", "output_path"):
            data.pop(key)
        return data

    def to_values(self) -> Dict[str, Any]:
        """Flat key/value form, the inverse of ``config_from_values``."""
        values: Dict[str, Any] = {
            "experiment": self.experiment,
            "n": self.model.n,
            "p": self.model.p,
            "beta": self.model.beta,
            "seed": self.model.seed,
            "trials": self.trials,
            "t_grid": self.t_grid,
            "workers": self.workers,
            "chunk_size": self.chunk_size,
            "checkpoint_every": self.checkpoint_every,
            "svd_method": self.svd_method,
        }
        if self.output_path:
            values["out"] = self.output_path
        values.update({k: getattr(self.class_params, k) for k in CLASS_PARAM_KEYS})
        values.update({k: getattr(self.constants, k) for k in CONSTANT_KEYS})
        values.update(self.options)
        return values

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        """
        Rebuild a configuration written by ``to_dict``.

        Raises:
            ConfigError: If the data is incomplete or invalid
        """
        try:
            constants = dict(data["constants"])
            provenance = constants.pop("provenance", None) or {}
            return cls(
                experiment=data["experiment"],
                model=ModelParams(**data["model"]),
                trials=int(data["trials"]),
                class_params=ClassParams(**data["class_params"]),
                constants=ProbabilityConstants(provenance=dict(provenance), **constants),
                t_grid=tuple(float(t) for t in data["t_grid"]),
                workers=int(data.get("workers", 1)),
                chunk_size=int(data["chunk_size"]),
                checkpoint_every=int(data.get("checkpoint_every", DEFAULT_CHECKPOINT_EVERY)),
                output_path=data.get("output_path"),
                svd_method=data["svd_method"],
                options={k: tuple(v) if isinstance(v, list) else v for k, v in data.get("options", {}).items()},
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"incomplete configuration record: {e}")
        except (ModelError, StructureError, ProbabilityError) as e:
            raise ConfigError(str(e))


class ExperimentCatalog:
    """Preset catalogue loaded from JSON with an mtime-validated cache."""

    # Class-level cache shared across instances
    _config_cache: Dict[str, Dict[str, Any]] = {}
    _config_file_timestamps: Dict[str, float] = {}

    def __init__(self, config_file: str = DEFAULT_CATALOG):
        self.config_file = config_file
        self.logger = get_logger("config")

    def load(self) -> Dict[str, Any]:
        """Load the catalogue from JSON file with caching"""
        config_path = Path(self.config_file)

        if not config_path.exists():
            raise FileNotFoundError(
                f"Experiment catalogue '{self.config_file}' not found. "
                f"Please ensure the file exists or pass --catalog."
            )

        try:
            file_mtime = config_path.stat().st_mtime

            if (self.config_file in self._config_cache and
                self.config_file in self._config_file_timestamps and
                self._config_file_timestamps[self.config_file] >= file_mtime):
                return self._config_cache[self.config_file]

            with open(config_path, "r") as f:
                catalog = json.load(f)

            if "experiments" not in catalog:
                raise ValueError("Catalogue must contain an 'experiments' section")

            if not isinstance(catalog["experiments"], dict):
                raise ValueError("'experiments' section must be a dictionary")

            for preset_name, preset in catalog["experiments"].items():
                for required in ("experiment", "description"):
                    if required not in preset:
                        raise ValueError(f"Preset '{preset_name}' missing required field: '{required}'")
                if preset["experiment"] not in EXPERIMENT_NAMES:
                    raise ValueError(f"Preset '{preset_name}' names unknown experiment '{preset['experiment']}'")
                for key in preset.get("settings", {}):
                    if key not in KEY_TYPES:
                        raise ValueError(f"Preset '{preset_name}' uses unknown key '{key}'")

            self._config_cache[self.config_file] = catalog
            self._config_file_timestamps[self.config_file] = file_mtime
            self.logger.debug(f"Loaded {len(catalog['experiments'])} presets from {self.config_file}")
            return catalog

        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON in catalogue '{self.config_file}': {e}")

    def preset(self, name: str) -> Optional[Dict[str, Any]]:
        return self.load()["experiments"].get(name)

    @staticmethod
    def list_experiments(config_file: str = DEFAULT_CATALOG):
        """List every experiment kind and the presets of the catalogue"""
        logger = get_logger("config")
        try:
            catalog = ExperimentCatalog(config_file).load()
        except FileNotFoundError as e:
            logger.user_error(str(e))
            return
        except ValueError as e:
            logger.user_error(f"Error reading catalogue: {e}")
            return

        metadata = catalog.get("metadata", {})
        logger.user_info("\nAvailable experiments:")
        logger.user_info("=" * 80)
        if metadata:
            logger.user_info(f"Catalogue Version: {metadata.get('version', 'Unknown')}")
            logger.user_info(f"Last Updated: {metadata.get('last_updated', 'Unknown')}")
            logger.user_info("-" * 80)
        logger.user_info("Kinds: " + ", ".join(EXPERIMENT_NAMES))
        logger.user_info("-" * 80)
        for name, preset in catalog["experiments"].items():
            logger.user_info(f"Preset: {name}  ({preset['experiment']})")
            logger.user_info(f"Description: {preset['description']}")
            settings = preset.get("settings", {})
            if settings:
                logger.user_info("Settings: " + ", ".join(f"{k}={v}" for k, v in settings.items()))
            logger.user_info("-" * 60)


def build_config(
    name: str,
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    catalog: Optional[ExperimentCatalog] = None,
) -> ExperimentConfig:
    """
    Merge preset, file and flag values into an ExperimentConfig.

    Args:
        name: An experiment kind or a preset of the catalogue
        file_values: Parsed config file
        overrides: Command-line values (None entries are ignored)
        catalog: Preset source; presets are only consulted when ``name`` is
            not an experiment kind

    Raises:
        ConfigError: If the merged values are invalid or incomplete
    """
    values: Dict[str, Any] = {}
    if name not in EXPERIMENT_NAMES:
        preset = None
        if catalog is not None:
            try:
                preset = catalog.preset(name)
            except (FileNotFoundError, ValueError) as e:
                raise ConfigError(str(e))
        if preset is None:
            raise ConfigError(f"'{name}' is neither an experiment kind nor a catalogue preset")
        values["experiment"] = preset["experiment"]
        for key, raw in preset.get("settings", {}).items():
            values[key] = coerce(key, raw)
    else:
        values["experiment"] = name
    requested = values["experiment"]

    for layer in (file_values or {}, overrides or {}):
        apply_layer(values, layer)
    if values["experiment"] != requested:
        raise ConfigError(f"config file names experiment '{values['experiment']}' but '{requested}' was requested")
    return config_from_values(values)


def apply_layer(values: Dict[str, Any], layer: Mapping[str, Any]):
    """Overlay one configuration layer in place; a later p or pn replaces both."""
    for key, value in layer.items():
        if value is None:
            continue
        if key in ("p", "pn"):
            values.pop("p", None)
            values.pop("pn", None)
        values[key] = coerce(key, value)


def config_from_values(values: Mapping[str, Any]) -> ExperimentConfig:
    """
    Build the typed configuration from a flat mapping of coerced values.

    Raises:
        ConfigError: If required keys are missing or values are out of range
    """
    values = dict(values)
    for required in ("experiment", "n", "trials"):
        if required not in values:
            raise ConfigError(f"missing required key '{required}'")
    if "p" in values and "pn" in values:
        raise ConfigError("give either 'p' or 'pn', not both")
    n = int(values["n"])
    if "pn" in values:
        p = resolve_p(n, values["pn"])
    elif "p" in values:
        p = float(values["p"])
    else:
        raise ConfigError("missing required key 'p' (or 'pn')")
    beta = int(values.get("beta", 1))

    try:
        model = ModelParams(n, p, beta=beta, seed=int(values.get("seed", 0)))
        overrides = {k: values[k] for k in CLASS_PARAM_KEYS if k in values}
        class_params = ClassParams.defaults(beta, **overrides)
        constants = ProbabilityConstants(**{k: float(values[k]) for k in CONSTANT_KEYS if k in values})
    except (ModelError, StructureError, ProbabilityError) as e:
        raise ConfigError(str(e))

    options = {k: values[k] for k in OPTION_DEFAULTS if k in values}
    return ExperimentConfig(
        experiment=values["experiment"],
        model=model,
        trials=int(values["trials"]),
        class_params=class_params,
        constants=constants,
        t_grid=tuple(values.get("t_grid", DEFAULT_T_GRID)),
        workers=int(values.get("workers", 1)),
        chunk_size=int(values.get("chunk_size", DEFAULT_CHUNK_SIZE)),
        checkpoint_every=int(values.get("checkpoint_every", DEFAULT_CHECKPOINT_EVERY)),
        output_path=values.get("out"),
        svd_method=values.get("svd_method", "lapack"),
        options=options,
    )


def changed_keys(a: ExperimentConfig, b: ExperimentConfig) -> Iterable[str]:
    """Top-level identity fields in which two configurations differ."""
    left, right = a.identity(), b.identity()
    return sorted(k for k in left if left[k] != right.get(k))
