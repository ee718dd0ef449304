# app/services/errors.py

"""
Domain errors raised by the services.

Everything derives from ValueError so callers that treat bad input as a
ValueError (the routes do) keep working without knowing the subclasses.
"""

from typing import Any, Dict, Type, TypeVar

from pydantic import BaseModel, ValidationError


class SplitRecError(ValueError):
    """Base class for all domain errors."""


class ConfigError(SplitRecError):
    """A configuration value is missing, malformed or violates a constraint."""


class InvalidInteractionError(SplitRecError):
    """An interaction vector breaks its length, range or distinctness bounds."""


class ShareMixingError(SplitRecError):
    """Shares with different masked index vectors were combined."""


class IncompleteShareSetError(SplitRecError):
    """Shares do not sum to a 0/1 mask, so at least one is missing."""


class DataError(SplitRecError):
    """Input data is out of range for the catalog or the run settings."""


class ParseError(SplitRecError):
    """An interaction file could not be parsed."""

    def __init__(self, message: str, line: int, column: int = 0):
        self.line = line
        self.column = column
        if line:
            location = f"line {line}" + (f", column {column}" if column else "")
            message = f"{location}: {message}"
        super().__init__(message)


class PhaseIncompleteError(SplitRecError):
    """The round budget ran out while triplets were still held by clients."""

    def __init__(self, message: str, metrics: Any):
        self.metrics = metrics
        super().__init__(message)


M = TypeVar("M", bound=BaseModel)


def build_model(model_cls: Type[M], **values: Any) -> M:
    """
    Validate values into a pydantic model, re-raising failures as ConfigError.

    Args:
        model_cls: pydantic model class to build
        **values: field values

    Returns:
        The validated model instance

    Raises:
        ConfigError: If validation fails
    """
    try:
        return model_cls(**values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or model_cls.__name__}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigError(f"Invalid {model_cls.__name__}: {problems}") from e


def describe(values: Dict[str, Any]) -> str:
    """Render a flat settings dict as 'k=v, k=v' for log lines."""
    return ", ".join(f"{k}={v}" for k, v in values.items())
