"""TOML configuration with strict key checking.

Defaults are usable with no file at all.  Unknown sections or keys are
errors, not silent no-ops; a typo in a config should fail loudly.
Precedence is handled by the CLI: command-line flags override the file,
which overrides these defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .backend import BackendConfig
from .loop import LoopConfig
from .normalize import NormalizeConfig
from .prefdata import PrefConfig


class ConfigError(ValueError):
    pass


@dataclass
class AppConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    normalize: NormalizeConfig = field(default_factory=NormalizeConfig)
    prefdata: PrefConfig = field(default_factory=PrefConfig)


_SECTIONS = {
    "backend": BackendConfig,
    "loop": LoopConfig,
    "normalize": NormalizeConfig,
    "prefdata": PrefConfig,
}


def load_config(path: str | None = None) -> AppConfig:
    """Load an AppConfig from a TOML file, or defaults when path is None."""
    if path is None:
        return AppConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    kwargs = {}
    for section, cls in _SECTIONS.items():
        values = data.get(section, {})
        if not isinstance(values, dict):
            raise ConfigError(f"section [{section}] must be a table")
        kwargs[section] = _build_section(section, cls, values)
    return AppConfig(**kwargs)


def _build_section(section: str, cls, values: dict):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(
            f"unknown keys in [{section}]: {sorted(unknown)} "
            f"(expected a subset of {sorted(known)})"
        )
    coerced = {}
    for name, value in values.items():
        coerced[name] = _coerce(section, name, value, known[name].type)
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in [{section}]: {exc}") from exc


def _coerce(section: str, name: str, value, annotation):
    # Annotations are strings under `from __future__ import annotations`.
    ann = annotation if isinstance(annotation, str) else getattr(annotation, "__name__", "")
    if ann == "float" and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if ann == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {name} must be an integer, got {value!r}")
    if ann == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {name} must be a number, got {value!r}")
    if ann == "str" and not isinstance(value, str):
        raise ConfigError(f"[{section}] {name} must be a string, got {value!r}")
    return value
