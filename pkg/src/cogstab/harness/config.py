"""Flat configuration files.

A config is a single mapping (YAML or JSON) whose keys are the scenario keys
plus a handful of run options. Unknown keys are rejected so that a typo in a
probability name cannot silently fall back to a default.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import yaml

from ..model import SCENARIO_KEYS, Scenario

OPTION_KEYS = (
    "mode",
    "horizon",
    "burn_in",
    "replications",
    "seed",
    "trajectory_stride",
    "n_points",
    "finite_capacity",
    "workers",
    "param",
    "grid",
    "inset",
    "n_per_side",
    "n_configs",
    "grid_size",
)
ALL_KEYS = SCENARIO_KEYS + OPTION_KEYS


class ConfigError(ValueError):
    pass


def load_config(path: str | Path) -> dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a flat mapping")
    check_keys(data)
    return data


def check_keys(data: Mapping[str, Any]) -> None:
    unknown = sorted(set(data) - set(ALL_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    nested = [k for k, v in data.items() if isinstance(v, (dict, list))]
    if nested:
        raise ConfigError(f"config values must be scalars: {', '.join(nested)}")


def merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Flag values (non-None) win over file values."""
    out = dict(base)
    out.update({k: v for k, v in overrides.items() if v is not None})
    check_keys(out)
    return out


def scenario_from(data: Mapping[str, Any]) -> Scenario:
    try:
        return Scenario.from_dict({k: v for k, v in data.items() if k in SCENARIO_KEYS})
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc).strip("'\"")) from exc


def header_lines(data: Mapping[str, Any]) -> dict[str, Any]:
    """Effective configuration in a stable key order, for output headers."""
    return {k: data[k] for k in ALL_KEYS if k in data}
