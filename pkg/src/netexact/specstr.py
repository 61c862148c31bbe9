"""Parsing of the ``name:key=value,key=value`` option strings used in configs."""

from __future__ import annotations

from .exceptions import ConfigError


def parse_spec(text: str) -> tuple[str, dict[str, str]]:
    """Split ``"eps-net:eps=2"`` into ``("eps-net", {"eps": "2"})``."""
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(f"empty option string: {text!r}")
    name, _, rest = text.strip().partition(":")
    opts = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq or not key.strip():
                raise ConfigError(f"malformed option {item!r} in {text!r}")
            opts[key.strip()] = value.strip()
    return name.strip().lower(), opts


def take(opts: dict, key: str, cast, default=None, source: str = ""):
    if key not in opts:
        return default
    raw = opts.pop(key)
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key!r} in {source!r}") from None


def ensure_consumed(opts: dict, source: str) -> None:
    if opts:
        raise ConfigError(f"unknown option(s) {sorted(opts)} in {source!r}")
