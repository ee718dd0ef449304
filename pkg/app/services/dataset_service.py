# app/services/dataset_service.py

"""
Interaction data sources: a plain-text loader and a synthetic generator.

File format: one user per line, whitespace-separated positive item indices.
Lines starting with '#' are comments. A Yelp2018-style extract can be
converted with e.g.

    awk '{ $1=""; print substr($0, 2) }' train.txt > interactions.txt

after re-basing item ids to start at 1.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

from app.dependencies.random_streams import DATASET, make_rng
from app.services.errors import ConfigError, DataError, ParseError
from app.services.split_service import InteractionVector

logger = logging.getLogger(__name__)


def _parse_line(text: str, line_no: int) -> List[int]:
    items: List[int] = []
    seen = set()
    position = 0
    for token in text.split():
        column = text.index(token, position) + 1
        position = column - 1 + len(token)
        if not (token.isascii() and token.isdigit()):
            raise ParseError(f"'{token}' is not a positive integer item index", line_no, column)
        value = int(token)
        if value == 0:
            raise ParseError("item index 0 is not allowed (indices start at 1)", line_no, column)
        if value in seen:
            raise ParseError(f"item {value} listed twice", line_no, column)
        seen.add(value)
        items.append(value)
    return items


def load_interactions(
    path: str,
    n_max: Optional[int] = None,
    n_item: Optional[int] = None,
) -> Tuple[List[InteractionVector], int]:
    """
    Load one interaction vector per user from a text file.

    Args:
        path: file to read
        n_max: reject users with more items than this
        n_item: catalog size; defaults to the largest index seen

    Returns:
        tuple: (vectors, n_item)

    Raises:
        ParseError: On malformed lines, index 0, blank user lines or an empty file
        DataError: On users over n_max or indices above an explicit n_item
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"Interaction file not found: {path}")

    vectors: List[InteractionVector] = []
    line_numbers: List[int] = []
    with file_path.open("r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            text = raw.rstrip("\n")
            if text.lstrip().startswith("#"):
                continue
            items = _parse_line(text, line_no)
            if not items:
                raise ParseError("user has no interactions", line_no)
            vectors.append(InteractionVector(tuple(items)))
            line_numbers.append(line_no)

    if not vectors:
        raise ParseError(f"no users found in {path}", 0)

    if n_max is not None:
        too_long = [line for line, vector in zip(line_numbers, vectors) if len(vector) > n_max]
        if too_long:
            raise DataError(
                f"{len(too_long)} users exceed n_max={n_max} on lines: "
                f"{', '.join(str(line) for line in too_long[:20])}"
                f"{' ...' if len(too_long) > 20 else ''}"
            )

    largest = max(max(vector.items) for vector in vectors)
    if n_item is None:
        n_item = largest
    elif largest > n_item:
        raise DataError(f"item index {largest} exceeds n_item={n_item}")

    logger.info(f"Loaded {len(vectors)} users over {n_item} items from {path}")
    return vectors, n_item


def generate_synthetic(n_user: int, n_item: int, n_max: int, seed: int) -> List[InteractionVector]:
    """
    Draw synthetic users: length uniform on [1, n_max], items uniform
    without replacement.

    Raises:
        ConfigError: If n_user < 0, n_max < 1 or n_max >= n_item
    """
    if n_user < 0:
        raise ConfigError(f"n_user must be non-negative, got {n_user}")
    if n_max < 1 or n_max >= n_item:
        raise ConfigError(f"Need 1 <= n_max < n_item (got n_max={n_max}, n_item={n_item})")

    rng = make_rng(seed, DATASET)
    lengths = rng.integers(1, n_max + 1, size=n_user)
    vectors = [
        InteractionVector.of(rng.choice(n_item, size=int(length), replace=False) + 1)
        for length in lengths
    ]
    logger.debug(f"Generated {n_user} synthetic users (n_item={n_item}, n_max={n_max}, seed={seed})")
    return vectors
