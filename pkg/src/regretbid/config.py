"""Sectioned key-value run configuration.

One INI file drives every command. Sections map onto dataclasses; values
are coerced to the type of the field's default, so a config file can only
set fields that exist. Unknown sections and keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from .baselines import BaselineOptions
from .errors import ConfigError
from .experiment import ALL_METHODS, MODES
from .forecasters import RuleOptions
from .simulator import MarketConfig


@dataclass
class PrepareOptions:
    min_hours: int = 100
    shift: bool = False
    ks_alpha: float = 1e-3
    t_alpha: float = 0.05
    min_cv: float = 0.1


@dataclass
class RunOptions:
    methods: tuple = ALL_METHODS
    modes: tuple = MODES
    jobs: int = 0  # 0: every available core
    keep_predictions: bool = True


@dataclass
class PathOptions:
    raw_log: str = "raw_log.csv"
    truth: str = "truth.json"
    manifest: str = "manifest.json"
    report_dir: str = "report"


@dataclass
class RunConfig:
    simulate: MarketConfig = field(default_factory=MarketConfig)
    prepare: PrepareOptions = field(default_factory=PrepareOptions)
    rules: RuleOptions = field(default_factory=RuleOptions)
    baselines: BaselineOptions = field(default_factory=BaselineOptions)
    run: RunOptions = field(default_factory=RunOptions)
    paths: PathOptions = field(default_factory=PathOptions)

    def flat(self) -> dict:
        """``section.key -> value`` view used for report provenance headers."""
        out = {}
        for sec in dataclasses.fields(self):
            for k, v in dataclasses.asdict(getattr(self, sec.name)).items():
                out[f"{sec.name}.{k}"] = v
        return out


SECTIONS = tuple(f.name for f in dataclasses.fields(RunConfig))
_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}
_NONE = ("", "none", "null")


def _scalar(text: str, like):
    if isinstance(like, bool):
        try:
            return _BOOL[text.lower()]
        except KeyError:
            raise ValueError(f"not a boolean: {text!r}") from None
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    # Strings, and numbers where the default gives no type to go by.
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def coerce(text: str, default):
    """Parse ``text`` into a value shaped like ``default``."""
    text = text.strip()
    if default is None:
        return None if text.lower() in _NONE else float(text)
    if isinstance(default, (tuple, list)):
        items = [t.strip() for t in text.split(",") if t.strip()]
        like = default[0] if len(default) else ""
        return tuple(_scalar(t, like) for t in items)
    return _scalar(text, default)


def apply_overrides(section_obj, values: dict, section: str):
    """Return a copy of the dataclass with string ``values`` parsed in."""
    known = {f.name: getattr(section_obj, f.name) for f in dataclasses.fields(section_obj)}
    changes = {}
    for key, text in values.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        try:
            changes[key] = coerce(text, known[key])
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None
    try:
        return dataclasses.replace(section_obj, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        new = apply_overrides(getattr(cfg, section), dict(parser[section]), section)
        cfg = dataclasses.replace(cfg, **{section: new})
    validate(cfg)
    return cfg


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def validate(cfg: RunConfig) -> None:
    bad = [m for m in cfg.run.methods if m not in ALL_METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {list(ALL_METHODS)}")
    bad = [m for m in cfg.run.modes if m not in MODES]
    if bad:
        raise ConfigError(f"unknown modes {bad}; choose from {list(MODES)}")
    if not cfg.run.methods or not cfg.run.modes:
        raise ConfigError("at least one method and one mode are required")


def dump_config(cfg: RunConfig) -> str:
    """INI text that ``parse_config`` reads back to an equal config."""
    lines = []
    for sec in SECTIONS:
        lines.append(f"[{sec}]")
        for k, v in dataclasses.asdict(getattr(cfg, sec)).items():
            if isinstance(v, (tuple, list)):
                v = ", ".join(str(x) for x in v)
            elif v is None:
                v = "none"
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)
