# app/services/virtual_id.py

"""
Virtual IDs: random tags over the 62 ASCII letters and digits
(codes 48-57, 65-90, 97-122) that link a client's triplets without
revealing its address.
"""

import string
from typing import List, NewType

import numpy as np

VirtualId = NewType("VirtualId", str)

# ASCII order: digits, uppercase, lowercase
ALPHABET = string.digits + string.ascii_uppercase + string.ascii_lowercase
_ALPHABET_CHARS = np.array(list(ALPHABET))
_ALLOWED = frozenset(ALPHABET)


def _check_length(id_len: int) -> None:
    if id_len < 1:
        raise ValueError(f"Virtual ID length must be at least 1, got {id_len}")


def new_virtual_id(id_len: int, rng: np.random.Generator) -> VirtualId:
    """Draw one virtual ID with i.i.d. uniform characters."""
    _check_length(id_len)
    codes = rng.integers(0, len(ALPHABET), size=id_len)
    return VirtualId("".join(_ALPHABET_CHARS[codes]))


def new_virtual_ids(count: int, id_len: int, rng: np.random.Generator) -> List[VirtualId]:
    """Draw many virtual IDs at once (same alphabet and distribution)."""
    _check_length(id_len)
    if count <= 0:
        return []
    codes = rng.integers(0, len(ALPHABET), size=(count, id_len))
    return [VirtualId("".join(row)) for row in _ALPHABET_CHARS[codes]]


def is_valid_virtual_id(text: str, id_len: int = 0) -> bool:
    """True if every character is in the alphabet (and the length matches, when given)."""
    if not text or (id_len and len(text) != id_len):
        return False
    return all(ch in _ALLOWED for ch in text)
