"""Detector configuration from defaults, a TOML file, environment and flags.

Precedence, highest first: command-line flags, ``GCA_<FIELD>`` environment
variables, the config file, built-in defaults. The file may hold the keys
at top level or under a ``[detector]`` table.
"""

from __future__ import annotations

import dataclasses
import os
import typing
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ContractError
from .types import DetectorConfig

ENV_PREFIX = "GCA_"
FIELDS = {f.name: f for f in dataclasses.fields(DetectorConfig)}
_HINTS = typing.get_type_hints(DetectorConfig)


def coerce(name: str, value: Any) -> Any:
    """Convert a file or string value to the type of config field ``name``."""
    if name not in FIELDS:
        raise ContractError(f"unknown config key {name!r}")
    ann = _HINTS[name]
    if typing.get_origin(ann) is Union:
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null")):
            return None
        ann = next(a for a in typing.get_args(ann) if a is not type(None))
    try:
        if typing.get_origin(ann) is tuple:
            items = value.split(",") if isinstance(value, str) else list(value)
            return tuple(float(x) for x in items)
        if ann is bool:
            if isinstance(value, str):
                low = value.strip().lower()
                if low not in ("1", "0", "true", "false", "yes", "no"):
                    raise ValueError(value)
                return low in ("1", "true", "yes")
            return bool(value)
        if isinstance(ann, type) and issubclass(ann, Enum):
            return ann(value)
        if ann is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if ann is float:
            return float(value)
    except (TypeError, ValueError) as exc:
        raise ContractError(f"bad value for {name}: {value!r}") from exc
    return value


def read_config_file(path: Union[str, Path]) -> dict[str, Any]:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    if "detector" in data and isinstance(data["detector"], dict):
        data = data["detector"]
    return {k: coerce(k, v) for k, v in data.items()}


def env_values(env: Mapping[str, str]) -> dict[str, Any]:
    out = {}
    for name in FIELDS:
        key = ENV_PREFIX + name.upper()
        if key in env and env[key].strip():
            out[name] = coerce(name, env[key])
    return out


def load_config(
    path: Optional[Union[str, Path]] = None,
    env: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> DetectorConfig:
    values: dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    values.update(env_values(os.environ if env is None else env))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = coerce(k, v)
    return DetectorConfig(**values)
