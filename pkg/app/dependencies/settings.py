# app/dependencies/settings.py

"""
Run settings: environment defaults, key=value config files and the
flag > file > environment > default precedence used by every command.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from dotenv import dotenv_values, load_dotenv

from app.services.errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)


def _env(key: str, default: str = "") -> str:
    v = os.getenv(key) or default
    return v.strip() if isinstance(v, str) else ""


# Environment-backed defaults
SPLITREC_OUT_DIR = _env("SPLITREC_OUT_DIR", "results")
SPLITREC_LOG_LEVEL = _env("SPLITREC_LOG_LEVEL", "INFO").upper()
SPLITREC_SEED = _env("SPLITREC_SEED", "0")

# Settings that may come from the environment when neither a flag nor the
# config file sets them.
ENV_FALLBACKS: Dict[str, str] = {
    "out_dir": SPLITREC_OUT_DIR,
    "log_level": SPLITREC_LOG_LEVEL,
    "seed": SPLITREC_SEED,
}

# Every key a config file may set.
CONFIG_KEYS = frozenset({
    "seed", "out_dir", "log_level",
    "n_item", "n_max", "c", "splits", "alpha", "id_len", "k",
    "max_rounds", "draw_mode", "ld_mode",
    "users", "trials", "workers",
    "alphas", "lengths", "s_values", "c_values", "n_users",
    "input", "synthetic",
})


def load_config_file(path: Optional[str]) -> Dict[str, str]:
    """
    Read a flat key=value config file.

    Args:
        path: file path, or None for no file

    Returns:
        dict: key -> raw string value

    Raises:
        ConfigError: If the file is missing or sets an unknown key
    """
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"Config file not found: {path}")

    raw = dotenv_values(config_path)
    values: Dict[str, str] = {}
    for key, value in raw.items():
        normalized = key.strip().lower().replace("-", "_")
        if normalized not in CONFIG_KEYS:
            raise ConfigError(
                f"Unknown key '{key}' in config file {path}. "
                f"Known keys: {', '.join(sorted(CONFIG_KEYS))}"
            )
        if value is None or value.strip() == "":
            raise ConfigError(f"Key '{key}' in config file {path} has no value")
        values[normalized] = value.strip()

    logger.debug(f"Loaded {len(values)} settings from {path}")
    return values


class RunSettings:
    """
    Resolves each setting with a fixed precedence:
    command-line flag, then config file, then environment, then default.
    """

    def __init__(self, file_values: Optional[Dict[str, str]] = None):
        self.file_values = dict(file_values or {})

    @classmethod
    def from_config(cls, path: Optional[str]) -> "RunSettings":
        return cls(load_config_file(path))

    def get(self, key: str, flag_value: Any = None, default: Any = None) -> Any:
        if flag_value is not None:
            return flag_value
        if key in self.file_values:
            return self.file_values[key]
        if key in ENV_FALLBACKS and ENV_FALLBACKS[key] != "":
            return ENV_FALLBACKS[key]
        return default

    def resolve(self, flags: Dict[str, Any], defaults: Dict[str, Any], keys: Iterable[str] = ()) -> Dict[str, Any]:
        """
        Resolve a group of settings at once.

        Args:
            flags: flag values as parsed by click (None when not given)
            defaults: built-in defaults
            keys: extra keys to resolve that have neither flag nor default

        Returns:
            dict: key -> resolved value (raw strings for file/env values;
            the request models coerce them)
        """
        names = list(dict.fromkeys([*flags.keys(), *defaults.keys(), *keys]))
        return {
            name: self.get(name, flags.get(name), defaults.get(name))
            for name in names
        }
