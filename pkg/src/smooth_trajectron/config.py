"""Flat key-value config files (a TOML subset: one ``key = value`` per line)."""

from __future__ import annotations

import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import ConfigurationError


def _escape(ch: str) -> str:
    if ch in '"\\':
        return "\\" + ch
    if ord(ch) < 0x20 or ord(ch) == 0x7F:
        return f"\\u{ord(ch):04x}"
    return ch


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return '"' + "".join(_escape(c) for c in value) + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise ConfigurationError(f"unsupported config value {value!r}")


def dumps(config: dict) -> str:
    """Sorted ``key = value`` lines; ``None`` values are omitted."""
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(config.items()) if v is not None)


def loads(text: str) -> dict:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config parse error: {exc}") from None
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigurationError(f"config must be flat; found tables {nested}")
    return data


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(config: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(config))
