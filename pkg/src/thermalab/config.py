"""Experiment configuration: INI-style files in, JSON snapshots out."""

import configparser
import dataclasses
import json
import re
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["ExperimentConfig", "load_config", "parse_config", "apply_overrides"]


@dataclass(frozen=True)
class HfConfig:
    density: str = "picket-fence"
    spacing: float = 1.0
    rho0: float = 1.0
    t0: float = 100.0
    n_levels: int = 800
    e_min: float = 0.0


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "phenomenological"
    mode: str = "diffusive"
    # microscopic coupling; when absent it is derived from spreading_width
    coupling: float = None
    spreading_width: float = 10.0


@dataclass(frozen=True)
class ObservableConfig:
    kind: str = "banded-random"
    bandwidth: float = 30.0
    strength: float = 1.0
    offset: float = 2.0
    function: str = "quadratic"
    center: float = None
    scale: float = 30.0


@dataclass(frozen=True)
class StateConfig:
    center_e: float = None
    width: float = 10.0


@dataclass(frozen=True)
class TimeGrid:
    t_max_over_invdelta: float = 6.0
    n_points: int = 200


@dataclass(frozen=True)
class EthConfig:
    e_bins: int = 12
    omega_bins: int = 40
    central: float = 0.6
    min_count: int = 20
    sweep_n_levels: tuple = ()
    c_of_t_points: int = 50


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 1
    delta: float = 30.0
    n_realizations: int = 100
    normalization: str = "gaussian-sqrt2pi"
    output_dir: str = "thermalab-out"
    jobs: int = None
    hf: HfConfig = field(default_factory=HfConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    observable: ObservableConfig = field(default_factory=ObservableConfig)
    state: StateConfig = field(default_factory=StateConfig)
    time_grid: TimeGrid = field(default_factory=TimeGrid)
    eth: EthConfig = field(default_factory=EthConfig)

    @property
    def width_ratio(self):
        """Target ``delta_s / delta``: below 1 the state should thermalize."""
        return self.state.width / self.delta

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["eth"]["sweep_n_levels"] = list(self.eth.sweep_n_levels)
        d["width_ratio"] = self.width_ratio
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("width_ratio", None)
        kwargs = {}
        for key, value in d.items():
            if key in _SECTIONS:
                sub = dict(value)
                if key == "eth":
                    sub["sweep_n_levels"] = tuple(sub.get("sweep_n_levels", ()))
                kwargs[key] = _SECTIONS[key](**sub)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


_SECTIONS = {
    "hf": HfConfig,
    "model": ModelConfig,
    "observable": ObservableConfig,
    "state": StateConfig,
    "time": TimeGrid,
    "time_grid": TimeGrid,
    "eth": EthConfig,
}
# INI section name -> ExperimentConfig attribute
_ATTR = {"time": "time_grid"}
# INI spellings matching the command-line flags
_ALIASES = {("run", "seed"): "master_seed", ("run", "out"): "output_dir",
            ("model", "lambda"): "coupling"}
_RUN_KEYS = ("master_seed", "delta", "n_realizations", "normalization", "output_dir", "jobs")
_CHOICES = {
    ("hf", "density"): ("picket-fence", "exponential"),
    ("model", "kind"): ("phenomenological", "microscopic"),
    ("model", "mode"): ("gaussian", "orthogonalized", "diffusive"),
    ("observable", "kind"): ("banded-random", "identity", "diagonal-smooth"),
    ("observable", "function"): ("linear", "quadratic", "cosine"),
    ("run", "normalization"): ("gaussian-sqrt2pi", "gaussian-sqrt2-pi", "interval"),
}
_POSITIVE = {
    ("run", "delta"), ("run", "n_realizations"), ("run", "jobs"), ("hf", "spacing"),
    ("hf", "rho0"), ("hf", "t0"), ("hf", "n_levels"), ("model", "spreading_width"),
    ("observable", "bandwidth"), ("observable", "scale"), ("state", "width"),
    ("time", "t_max_over_invdelta"), ("time", "n_points"), ("eth", "e_bins"),
    ("eth", "omega_bins"), ("eth", "central"), ("eth", "min_count"), ("eth", "c_of_t_points"),
}
_NONNEGATIVE = {("model", "coupling"), ("observable", "strength")}


def _line_index(text):
    """Map ``(section, key)`` to its 1-based line number in ``text``."""
    where = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", stripped)
        if m:
            section = m.group(1).strip().lower()
            where[(section, None)] = lineno
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", stripped)
        if m and section is not None:
            where[(section, m.group(1).strip().lower())] = lineno
    return where


def _convert(raw, target_type, section, key, lineno):
    text = raw.strip()
    try:
        if target_type == "tuple":
            return tuple(int(v) for v in re.split(r"[,\s]+", text) if v)
        if text.lower() in ("", "none", "auto"):
            return None
        if target_type is int or target_type == "int":
            value = int(text, 0)
        elif target_type is float or target_type == "float":
            value = float(text)
        else:
            value = text
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {target_type}", lineno) from None
    choices = _CHOICES.get((section, key))
    if choices and value not in choices:
        raise ConfigError(f"[{section}] {key} must be one of {', '.join(choices)}", lineno)
    if (section, key) in _POSITIVE and isinstance(value, (int, float)) and not value > 0:
        raise ConfigError(f"[{section}] {key} must be positive", lineno)
    if (section, key) in _NONNEGATIVE and isinstance(value, (int, float)) and value < 0:
        raise ConfigError(f"[{section}] {key} must be non-negative", lineno)
    if (section, key) == ("run", "master_seed") and not 0 <= value < 2**64:
        raise ConfigError("master_seed must be an unsigned 64-bit integer", lineno)
    return value


def _field_types(cls):
    types = {}
    for f in dataclasses.fields(cls):
        if f.name == "sweep_n_levels":
            types[f.name] = "tuple"
        elif f.default is None or f.name in ("jobs",):
            types[f.name] = {"coupling": "float", "center": "float", "center_e": "float",
                             "jobs": "int"}[f.name]
        else:
            types[f.name] = type(f.default) if f.default is not dataclasses.MISSING else str
    return types


def parse_config(text, source="<config>"):
    """Parse INI text into an :class:`ExperimentConfig`; unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected key = value)", lineno) from None
    where = _line_index(text)
    run_types = _field_types(ExperimentConfig)
    top = {}
    subs = {}
    for section in parser.sections():
        name = section.strip().lower()
        if name == "run":
            types = {k: run_types[k] for k in _RUN_KEYS}
        elif name in _SECTIONS and name != "time_grid":
            types = _field_types(_SECTIONS[name])
        else:
            raise ConfigError(f"unknown section [{section}]", where.get((name, None)))
        values = {}
        for key, raw in parser.items(section):
            lineno = where.get((name, key))
            key = _ALIASES.get((name, key), key)
            if key in values:
                raise ConfigError(f"{key!r} given twice in [{section}]", lineno)
            if key not in types:
                raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
            values[key] = _convert(raw, types[key], name, key, lineno)
        if name == "run":
            top.update(values)
        else:
            subs[_ATTR.get(name, name)] = _SECTIONS[name](**values)
    return ExperimentConfig(**top, **subs)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path))


def apply_overrides(config, seed=None, out=None, jobs=None, n_levels=None, delta=None,
                    coupling=None):
    """Command-line flags take precedence over the file."""
    changes = {}
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        changes["master_seed"] = seed
    if out is not None:
        changes["output_dir"] = str(out)
    if jobs is not None:
        if jobs < 1:
            raise ConfigError("--jobs must be positive")
        changes["jobs"] = jobs
    if delta is not None:
        if not delta > 0:
            raise ConfigError("--delta must be positive")
        changes["delta"] = delta
    if n_levels is not None:
        if n_levels < 2:
            raise ConfigError("--n-levels must be at least 2")
        changes["hf"] = dataclasses.replace(config.hf, n_levels=n_levels)
    if coupling is not None:
        if coupling < 0:
            raise ConfigError("--lambda must be non-negative")
        changes["model"] = dataclasses.replace(config.model, coupling=coupling)
    return dataclasses.replace(config, **changes)
