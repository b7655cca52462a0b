"""Line-oriented experiment config files.

A config file has ``[section]`` headers and ``key = value`` lines; ``#``
starts a comment.  Sections map onto the experiment dataclasses; values are
typed from the dataclass fields, lists are comma-separated.  Every error
names the offending line and key.
"""
from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field

from .hawking import HawkingConfig
from .lensing import LensingConfig

__all__ = [
    "ConfigError",
    "SpectrumConfig",
    "SweepConfig",
    "ValidateConfig",
    "ExperimentConfig",
    "SECTIONS",
    "COMMANDS",
    "parse_config",
    "serialize_config",
]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line, self.key, self.detail = line, key, message


@dataclass(frozen=True)
class SpectrumConfig:
    dimensionality: str = "grid2d"
    t_x: float = 1.0
    t_y: float = 1.0
    t_z: float = 1.0
    beta: float | None = None
    tilts: tuple = (0.0, 0.5, 1.0, 1.5)
    n_points: int = 401

    def __post_init__(self):
        if self.dimensionality not in ("grid2d", "chain1d"):
            raise ValueError("dimensionality must be grid2d or chain1d")
        if self.n_points < 3:
            raise ValueError("n_points must be at least 3")
        if not self.tilts:
            raise ValueError("tilts must not be empty")


@dataclass(frozen=True)
class SweepConfig:
    gammas: tuple = (10.0, 15.0, 20.0)
    bs: tuple = (30.0, 50.0, 80.0)
    b_fixed: float = 30.0
    gamma_fixed: float = 20.0

    def __post_init__(self):
        if not self.gammas or not self.bs:
            raise ValueError("gammas and bs must not be empty")
        if any(b <= 0 for b in self.bs) or self.b_fixed <= 0:
            raise ValueError("impact parameters must be positive")


@dataclass(frozen=True)
class ValidateConfig:
    n: int = 16
    n_k: int = 25

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if self.n_k < 1:
            raise ValueError("n_k must be positive")


SECTIONS = {
    "spectrum": SpectrumConfig,
    "hawking": HawkingConfig,
    "lens": LensingConfig,
    "sweep": SweepConfig,
    "validate": ValidateConfig,
}

# sections each command reads
COMMANDS = {
    "spectrum": ("spectrum",),
    "hawking": ("hawking",),
    "lens": ("lens",),
    "sweep": ("lens", "sweep"),
    "validate": ("validate",),
}


@dataclass
class ExperimentConfig:
    command: str
    sections: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.sections[name]


def _field_types(cls):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def _parse_scalar(text: str, kind):
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got '{text}'")
    if kind is int:
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"expected an integer, got '{text}'") from None
    if kind is float:
        try:
            v = float(text)
        except ValueError:
            raise ValueError(f"expected a number, got '{text}'") from None
        if not math.isfinite(v):
            raise ValueError(f"expected a finite number, got '{text}'")
        return v
    return text


def _parse_value(text: str, kind):
    origin = typing.get_origin(kind)
    args = typing.get_args(kind)
    if origin in (typing.Union, types.UnionType):
        inner = [a for a in args if a is not type(None)]
        if text.lower() in ("none", ""):
            return None
        return _parse_value(text, inner[0])
    if kind is tuple or origin is tuple:
        items = [s.strip() for s in text.split(",") if s.strip()]
        return tuple(_parse_scalar(s, float) for s in items)
    return _parse_scalar(text, kind)


def parse_config(text: str, command: str) -> ExperimentConfig:
    """Validate ``text`` for ``command`` and fill defaults for missing keys.

    Sections not read by ``command`` are still checked for unknown keys and
    bad values.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command '{command}'")
    raw: dict[str, dict] = {}
    where: dict[tuple, int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError("unterminated section header", lineno)
            section = body[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section '{section}'", lineno)
            if section in raw:
                raise ConfigError(f"duplicate section '{section}'", lineno)
            raw[section] = {}
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if section is None:
            raise ConfigError("key outside any section", lineno, key)
        ftypes = _field_types(SECTIONS[section])
        if key not in ftypes:
            raise ConfigError(f"unknown key in [{section}]", lineno, key)
        if key in raw[section]:
            raise ConfigError("duplicate key", lineno, key)
        try:
            raw[section][key] = _parse_value(value, ftypes[key])
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, key) from None
        where[(section, key)] = lineno

    out = ExperimentConfig(command)
    names = list(COMMANDS[command]) + [n for n in raw if n not in COMMANDS[command]]
    for name in names:
        values = raw.get(name, {})
        try:
            out.sections[name] = SECTIONS[name](**values)
        except (ValueError, TypeError) as exc:
            # blame the first key of the section when the check spans several
            key = next(iter(values), None)
            raise ConfigError(str(exc), where.get((name, key)), key) from None
    return out


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(float(v)) for v in value)
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    """Text that :func:`parse_config` turns back into an equal config."""
    lines = []
    for name, section in config.sections.items():
        lines.append(f"[{name}]")
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {_format(getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)
