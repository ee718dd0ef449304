# app/dependencies/__init__.py

from app.dependencies.random_streams import RandomStreams, derive_seed, make_rng
from app.dependencies.settings import RunSettings

__all__ = ["RandomStreams", "RunSettings", "derive_seed", "make_rng"]
