"""TOML configuration with environment fallbacks.

Precedence: command-line flag, then config file, then environment, then the
built-in default.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def section(cfg: dict, name: str) -> dict:
    value = cfg.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def resolve(flag: Any, file_value: Any, env_var: Optional[str], default: Any, cast=None):
    """First non-None of flag, file value, environment variable, default."""
    for value in (flag, file_value):
        if value is not None:
            return cast(value) if cast else value
    if env_var and os.environ.get(env_var) not in (None, ""):
        try:
            return cast(os.environ[env_var]) if cast else os.environ[env_var]
        except ValueError:
            raise ConfigError(f"invalid value for {env_var}: {os.environ[env_var]!r}") from None
    return default


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    max_batch: int = 512
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise ConfigError(f"port out of range: {self.port}")
        if self.max_batch < 1:
            raise ConfigError("max_batch must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def build(cls, cfg: dict, host=None, port=None, max_batch=None, workers=None) -> "ServiceConfig":
        s = section(cfg, "service")
        try:
            return cls(
                host=resolve(host, s.get("host"), None, cls.host, str),
                port=resolve(port, s.get("port"), "CONAN_PORT", cls.port, int),
                max_batch=resolve(max_batch, s.get("max_batch"), "CONAN_MAX_BATCH", cls.max_batch, int),
                workers=resolve(workers, s.get("workers"), None, cls.workers, int),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
