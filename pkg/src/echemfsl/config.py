"""Flat ``name = value`` configuration files.

One assignment per line; blank lines and ``#`` comments (full-line or
trailing) are ignored.  Values stay strings here; callers convert.
"""

from __future__ import annotations

import os


class ConfigError(Exception):
    """Malformed or inconsistent run configuration."""


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse key-value assignments; errors carry 1-based line numbers."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'name = value', got {raw!r}")
        name, value = line.split("=", 1)
        name = name.strip()
        value = value.strip()
        if not name:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if name in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {name!r}")
        out[name] = value
    return out


def read_kv_file(path: str | os.PathLike) -> dict[str, str]:
    """Read a key-value file; missing files raise ConfigError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_kv_text(text, source=str(path))
