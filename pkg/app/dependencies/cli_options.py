# app/dependencies/cli_options.py

"""
Shared command plumbing: common options, list/range parameters, setting
resolution and translation of domain errors into click errors.
"""

import functools
import logging
from typing import Any, Callable, Dict, List, Optional, Type, Union

import click

from app.dependencies.logging_setup import configure_logging
from app.dependencies.settings import RunSettings
from app.services.errors import ConfigError, SplitRecError, describe

logger = logging.getLogger(__name__)

Number = Union[int, float]


def parse_number_list(text: Any, cast: Type = float) -> List[Number]:
    """
    Parse "0.5,0.9", "1..8" or "100..1000:100" (ranges inclusive, integers only).

    Lists and tuples are passed through with each entry cast.

    Raises:
        ConfigError: On malformed entries or empty input
    """
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    if isinstance(text, (int, float)):
        return [cast(text)]

    values: List[Number] = []
    for token in str(text).split(","):
        token = token.strip()
        if not token:
            continue
        try:
            if ".." in token:
                start, _, rest = token.partition("..")
                stop, _, step = rest.partition(":")
                start_i, stop_i, step_i = int(start), int(stop), int(step) if step else 1
                if step_i < 1 or stop_i < start_i:
                    raise ValueError
                values.extend(cast(v) for v in range(start_i, stop_i + 1, step_i))
            else:
                values.append(cast(token))
        except ValueError:
            raise ConfigError(f"Malformed list entry '{token}' in '{text}'")
    if not values:
        raise ConfigError(f"Empty list: '{text}'")
    return values


class NumberListType(click.ParamType):
    """Click parameter for comma lists and a..b[:step] ranges."""
    name = "list"

    def __init__(self, cast: Type = float):
        self.cast = cast

    def convert(self, value, param, ctx):
        try:
            return parse_number_list(value, self.cast)
        except ConfigError as e:
            self.fail(str(e), param, ctx)


INT_LIST = NumberListType(int)
FLOAT_LIST = NumberListType(float)


def common_options(command: Callable) -> Callable:
    """Attach --seed, --out-dir, --config and --log-level to a command."""
    options = [
        click.option("--seed", type=click.IntRange(min=0), default=None,
                     help="Master seed (env SPLITREC_SEED, default 0)."),
        click.option("--out-dir", type=click.Path(file_okay=False), default=None,
                     help="Output directory (env SPLITREC_OUT_DIR, default ./results)."),
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="key=value config file; flags override it."),
        click.option("--log-level", default=None,
                     help="Logging level (env SPLITREC_LOG_LEVEL, default INFO)."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def prepare_run(config_path: Optional[str], flags: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
    """
    Resolve settings (flag > config file > environment > default) and
    configure logging.

    Returns:
        dict: resolved values, raw strings where they came from file or env
    """
    settings = RunSettings.from_config(config_path)
    values = settings.resolve(flags, defaults, keys=("seed", "out_dir", "log_level"))
    configure_logging(values.get("log_level"))
    logger.debug(f"Resolved settings: {describe(values)}")
    return values


def handles_domain_errors(command: Callable) -> Callable:
    """Turn domain errors into click errors (nonzero exit, message on stderr)."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except SplitRecError as e:
            raise click.ClickException(str(e))
        except ValueError as e:
            raise click.ClickException(f"Invalid input: {e}")
        except click.ClickException:
            raise
        except Exception as e:
            logger.error(f"Unexpected error in {command.__name__}: {e}", exc_info=True)
            raise

    return wrapper
