"""Flat key/value config files (YAML mappings, SI units) shared by vehicle
parameters, controller settings, and scenario definitions."""

from __future__ import annotations

import dataclasses

import yaml

__all__ = ["ConfigError", "load_flat_mapping", "save_flat_mapping", "dataclass_from_mapping"]


class ConfigError(Exception):
    """Malformed or inconsistent configuration input."""


def load_flat_mapping(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat key/value mapping")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"{path}: nested mapping under {key!r} not allowed")
    return data


def save_flat_mapping(mapping: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(dict(mapping), fh, default_flow_style=False, sort_keys=True)


def dataclass_from_mapping(cls, mapping: dict, **overrides):
    """Build a dataclass from a flat mapping, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(mapping) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    kwargs = dict(mapping)
    kwargs.update(overrides)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
