"""Key-value text config files (``key = value``, ``#`` comments)."""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any

from .errors import ConfigError


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = line.split("=", 1)
        elif ":" in line:
            key, value = line.split(":", 1)
        else:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def read_kv(path: str | Path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())


def _coerce(value: str, default: Any) -> Any:
    if isinstance(default, bool):
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        return int(float(value)) if "e" in value.lower() else int(value)
    if isinstance(default, float) or default is None:
        if value.lower() in ("none", ""):
            return None
        try:
            return float(value)
        except ValueError:
            return value
    return value


def build_dataclass(cls, values: dict[str, str], aliases: dict[str, str] | None = None):
    """Instantiate dataclass ``cls`` from string values, coercing by field default type.

    Unknown keys raise ConfigError. ``aliases`` maps file keys to field names.
    """
    aliases = aliases or {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        name = aliases.get(key, key)
        if name not in fields:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
        f = fields[name]
        if f.default is not dataclasses.MISSING:
            default = f.default
        elif f.default_factory is not dataclasses.MISSING:  # type: ignore[misc]
            raise ConfigError(f"key {key!r} cannot be set from a flat config")
        else:
            default = 0.0
        try:
            kwargs[name] = _coerce(value, default)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return cls(**kwargs)
