"""Experiment configuration: TOML parsing, validation, shipped presets."""
from __future__ import annotations

import dataclasses
import os
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .curriculum import CurriculumConfig
from .errors import ConfigError

DATASETS = ("mnist", "fashion_mnist")
MINING_SCOPES = ("first_layer", "network_mean")
BASELINE_GOODNESS = ("sum", "mean")
PRECISIONS = ("float32", "float64")
TOGGLES = ("multiscale", "curriculum", "adaptive_threshold", "lr_schedule")


@dataclass(frozen=True)
class Toggles:
    multiscale: bool = True
    curriculum: bool = True
    adaptive_threshold: bool = True
    lr_schedule: bool = True

    @classmethod
    def baseline(cls) -> "Toggles":
        return cls(False, False, False, False)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    dataset: str = "mnist"
    data_dir: str = "data/mnist"
    train_subset: int | None = None
    test_subset: int | None = None
    architecture: tuple[int, ...] = (784, 600, 600, 500)
    theta0: float = 2.0
    eta0: float = 0.04
    epochs: int = 1500
    batch_size: int = 50_000
    seed: int = 0
    eval_every: int = 50
    eval_train: bool = True
    max_grad_norm: float = 0.3
    normalize_between_layers: bool = True
    prediction_skip_first_layer: bool = True
    precision: str = "float32"
    baseline_goodness: str = "sum"
    mining_scope: str = "first_layer"
    toggles: Toggles = field(default_factory=Toggles)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)

    def __post_init__(self):
        arch = self.architecture
        if len(arch) < 2:
            raise ConfigError("architecture needs an input width and at least one layer")
        if any(int(w) < 1 for w in arch):
            raise ConfigError(f"architecture widths must be >= 1, got {list(arch)}")
        if self.dataset in DATASETS and arch[0] != 784:
            raise ConfigError(f"architecture must start at 784 for {self.dataset}, got {arch[0]}")
        for name in ("epochs", "batch_size", "eval_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.theta0 <= 0 or self.eta0 <= 0 or self.max_grad_norm <= 0:
            raise ConfigError("theta0, eta0 and max_grad_norm must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for name, allowed in (
            ("precision", PRECISIONS),
            ("baseline_goodness", BASELINE_GOODNESS),
            ("mining_scope", MINING_SCOPES),
        ):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    @property
    def num_layers(self) -> int:
        return len(self.architecture) - 1

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_toggles(self, **changes) -> "ExperimentConfig":
        return self.replace(toggles=dataclasses.replace(self.toggles, **changes))


# section -> key -> (ExperimentConfig field, type)
_SCHEMA: dict[str, dict[str, tuple[str, type]]] = {
    "": {"name": ("name", str)},
    "dataset": {
        "name": ("dataset", str),
        "dir": ("data_dir", str),
        "train_subset": ("train_subset", int),
        "test_subset": ("test_subset", int),
    },
    "model": {"architecture": ("architecture", list)},
    "training": {
        "theta0": ("theta0", float),
        "eta0": ("eta0", float),
        "epochs": ("epochs", int),
        "batch_size": ("batch_size", int),
        "seed": ("seed", int),
        "eval_every": ("eval_every", int),
        "eval_train": ("eval_train", bool),
        "max_grad_norm": ("max_grad_norm", float),
        "normalize_between_layers": ("normalize_between_layers", bool),
        "prediction_skip_first_layer": ("prediction_skip_first_layer", bool),
        "precision": ("precision", str),
        "baseline_goodness": ("baseline_goodness", str),
        "mining_scope": ("mining_scope", str),
    },
    "toggles": {name: (name, bool) for name in TOGGLES},
    "curriculum": {f.name: (f.name, float) for f in dataclasses.fields(CurriculumConfig)},
}


def _line_of(text: str, key: str, section: str) -> int | None:
    """Best-effort line number of ``key`` (inside ``[section]`` when given)."""
    current = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", stripped)
        if m:
            current = m.group(1)
            continue
        if current == section and re.match(rf"^{re.escape(key)}\s*=", stripped):
            return lineno
    return None


def _where(text: str, key: str, section: str) -> str:
    line = _line_of(text, key, section)
    full = f"{section}.{key}" if section else key
    return f"'{full}' (line {line})" if line else f"'{full}'"


def _coerce(value, typ: type, where: str):
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if typ is list:
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where}: expected a list of integers, got {value!r}")
        return tuple(value)
    raise AssertionError(typ)


def config_from_text(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    values: dict = {}
    toggles: dict = {}
    curriculum: dict = {}
    for section, body in doc.items():
        if section in _SCHEMA and section and isinstance(body, dict):
            items, sect = body.items(), section
        elif section in _SCHEMA[""]:
            items, sect = [(section, body)], ""
        else:
            raise ConfigError(f"{source}: unknown key {_where(text, section, '')}")
        for key, value in items:
            if key not in _SCHEMA[sect]:
                raise ConfigError(f"{source}: unknown key {_where(text, key, sect)}")
            fname, typ = _SCHEMA[sect][key]
            value = _coerce(value, typ, f"{source}: {_where(text, key, sect)}")
            if sect == "toggles":
                toggles[fname] = value
            elif sect == "curriculum":
                curriculum[fname] = value
            else:
                values[fname] = value

    for required in ("architecture", "theta0", "eta0", "epochs"):
        if required not in values:
            raise ConfigError(f"{source}: missing required key '{required}'")
    if not values["architecture"]:
        raise ConfigError(f"{source}: {_where(text, 'architecture', 'model')} must not be empty")
    try:
        return ExperimentConfig(toggles=Toggles(**toggles), curriculum=CurriculumConfig(**curriculum), **values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("amga.presets").iterdir() if p.name.endswith(".toml"))


def parse_config(path) -> ExperimentConfig:
    """Load a config file, or a shipped preset by name (e.g. ``mnist_amga``).

    ``AMGA_SEED`` in the environment overrides the configured seed.
    """
    p = Path(path)
    if p.is_file():
        text, source = p.read_text(), str(p)
    elif str(path) in preset_names():
        text = resources.files("amga.presets").joinpath(f"{path}.toml").read_text()
        source = f"preset {path}"
    else:
        raise ConfigError(f"no config file or preset named {str(path)!r}")
    cfg = config_from_text(text, source)
    env_seed = os.environ.get("AMGA_SEED")
    if env_seed:
        try:
            cfg = cfg.replace(seed=int(env_seed))
        except ValueError as exc:
            raise ConfigError(f"AMGA_SEED must be an integer, got {env_seed!r}") from exc
    return cfg
