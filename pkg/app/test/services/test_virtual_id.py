# app/test/services/test_virtual_id.py

import pytest

from app.dependencies.random_streams import make_rng
from app.services.virtual_id import ALPHABET, is_valid_virtual_id, new_virtual_id, new_virtual_ids


def test_alphabet_is_62_ascii_letters_and_digits():
    assert len(ALPHABET) == 62
    assert sorted(ALPHABET) == list(ALPHABET)
    assert all(ch.isascii() and ch.isalnum() for ch in ALPHABET)


def test_new_virtual_id_has_requested_length(rng):
    vid = new_virtual_id(7, rng)
    assert len(vid) == 7
    assert is_valid_virtual_id(vid, 7)


def test_batch_draw_is_deterministic():
    assert new_virtual_ids(50, 5, make_rng(1)) == new_virtual_ids(50, 5, make_rng(1))
    assert new_virtual_ids(50, 5, make_rng(1)) != new_virtual_ids(50, 5, make_rng(2))


def test_batch_draw_handles_zero_count(rng):
    assert new_virtual_ids(0, 7, rng) == []


def test_length_one_uses_every_symbol():
    ids = new_virtual_ids(5000, 1, make_rng(4))
    assert set(ids) == set(ALPHABET)


@pytest.mark.parametrize("length", [0, -3])
def test_rejects_non_positive_length(rng, length):
    with pytest.raises(ValueError):
        new_virtual_id(length, rng)


@pytest.mark.parametrize("text,id_len,expected", [
    ("aZ09xyz", 7, True),
    ("aZ09xyz", 0, True),
    ("aZ09xy", 7, False),
    ("aZ09-yz", 7, False),
    ("", 0, False),
    ("äbc", 0, False),
])
def test_is_valid_virtual_id(text, id_len, expected):
    assert is_valid_virtual_id(text, id_len) is expected
