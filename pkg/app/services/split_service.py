# app/services/split_service.py

"""
Vector splitting.

A user's interaction vector is hidden among fake items (the masked matrix),
then its 0/1 mask is split into s_spl additive shares whose component-wise
sum is the mask. Reconstruction sums the shares and keeps the columns whose
total is 1. Everything here is a pure function of its inputs and the
caller's numpy Generator.
"""

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.services.errors import (
    IncompleteShareSetError,
    InvalidInteractionError,
    ShareMixingError,
)

# Split vectors and speculated vectors are plain integer arrays of length n*.
SplitVector = npt.NDArray[np.int64]
SpeculatedVector = npt.NDArray[np.int64]


# ============================================
# DOMAIN TYPES
# ============================================

class SplitConfig(BaseModel):
    """Catalog size, per-user cap, fake-item multiplier and share count."""
    model_config = ConfigDict(frozen=True)

    n_item: int = Field(..., ge=2, description="Number of catalog items")
    n_max: int = Field(..., ge=1, description="Maximum interactions per user")
    c: int = Field(2, gt=1, description="Fake-item multiplier")
    s_spl: int = Field(..., ge=1, description="Split vectors per source vector")

    @model_validator(mode="after")
    def _check_capacity(self) -> "SplitConfig":
        if self.c * self.n_max >= self.n_item:
            raise ValueError(
                f"c * n_max must be smaller than n_item "
                f"(got {self.c} * {self.n_max} = {self.c * self.n_max} >= {self.n_item})"
            )
        return self

    @property
    def n_star(self) -> int:
        """Length of the masked index vector."""
        return self.c * self.n_max


@dataclass(frozen=True)
class InteractionVector:
    """Distinct item indices a single user interacted with."""
    items: Tuple[int, ...]

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            raise InvalidInteractionError(f"Interaction items must be distinct: {list(self.items)}")

    @classmethod
    def of(cls, items: Sequence[int]) -> "InteractionVector":
        return cls(tuple(int(i) for i in items))

    def __len__(self) -> int:
        return len(self.items)

    def as_set(self) -> frozenset:
        return frozenset(self.items)


@dataclass(frozen=True, eq=False)
class MaskedMatrix:
    """
    Real and fake item indices in shuffled order, with a 0/1 mask that
    marks the real ones.
    """
    indices: npt.NDArray[np.int64]
    mask: npt.NDArray[np.int64]


@dataclass(frozen=True, eq=False)
class SplitShare:
    """One split vector together with the masked index vector it applies to."""
    split: SplitVector
    indices: npt.NDArray[np.int64]

    def fingerprint(self) -> bytes:
        digest = hashlib.blake2b(digest_size=16)
        digest.update(self.indices.tobytes())
        digest.update(self.split.tobytes())
        return digest.digest()


# ============================================
# VALIDATION
# ============================================

def check_interactions(source: InteractionVector, cfg: SplitConfig, allow_empty: bool = False) -> None:
    """
    Validate an interaction vector against the split settings.

    Args:
        source: vector to check
        cfg: split settings (n_item, n_max)
        allow_empty: accept a zero-length vector (recommendation lists may be empty)

    Raises:
        InvalidInteractionError: If length or index bounds are violated
    """
    if len(source) == 0 and not allow_empty:
        raise InvalidInteractionError("Interaction vector is empty; users with no interactions are rejected")
    if len(source) > cfg.n_max:
        raise InvalidInteractionError(
            f"Interaction vector has {len(source)} items, more than n_max={cfg.n_max}"
        )
    out_of_range = [i for i in source.items if i < 1 or i > cfg.n_item]
    if out_of_range:
        raise InvalidInteractionError(
            f"Item indices out of range [1, {cfg.n_item}]: {out_of_range[:10]}"
        )


# ============================================
# SPLITTING
# ============================================

def _sample_fakes(real: npt.NDArray[np.int64], n_item: int, count: int, rng: np.random.Generator) -> npt.NDArray[np.int64]:
    if count == 0:
        return np.empty(0, dtype=np.int64)
    pool = np.setdiff1d(np.arange(1, n_item + 1, dtype=np.int64), real, assume_unique=True)
    return rng.choice(pool, size=count, replace=False)


def mask_interactions(
    source: InteractionVector,
    cfg: SplitConfig,
    rng: np.random.Generator,
    allow_empty: bool = False,
) -> MaskedMatrix:
    """
    Pad the real items with distinct fake items and shuffle both together.

    Args:
        source: the user's interactions
        cfg: split settings
        rng: random stream
        allow_empty: accept a zero-length source

    Returns:
        MaskedMatrix: n* indices and the aligned 0/1 mask
    """
    check_interactions(source, cfg, allow_empty=allow_empty)

    real = np.asarray(source.items, dtype=np.int64)
    n_fake = cfg.n_star - real.size
    fakes = _sample_fakes(real, cfg.n_item, n_fake, rng)

    indices = np.concatenate([real, fakes])
    mask = np.concatenate([np.ones(real.size, dtype=np.int64), np.zeros(n_fake, dtype=np.int64)])
    order = rng.permutation(cfg.n_star)
    return MaskedMatrix(indices=indices[order], mask=mask[order])


def split_mask(masked: MaskedMatrix, cfg: SplitConfig, rng: np.random.Generator) -> List[SplitShare]:
    """
    Split a masked matrix's 0/1 row into s_spl additive shares.

    Base values are uniform over {-1, 0, 1}. The difference between the mask
    and the base sum is then added, per dimension, to one share picked
    uniformly at random, which forces the shares to sum to the mask.
    """
    n_star = masked.indices.size
    splits = rng.integers(-1, 2, size=(cfg.s_spl, n_star), dtype=np.int64)
    diff = masked.mask - splits.sum(axis=0)
    chosen = rng.integers(0, cfg.s_spl, size=n_star)
    splits[chosen, np.arange(n_star)] += diff

    indices = masked.indices.copy()
    indices.setflags(write=False)
    shares = []
    for row in splits:
        row.setflags(write=False)
        shares.append(SplitShare(split=row, indices=indices))
    return shares


def split_vector(
    source: InteractionVector,
    cfg: SplitConfig,
    rng: np.random.Generator,
    allow_empty: bool = False,
) -> List[SplitShare]:
    """
    Mask and split an interaction (or recommendation) vector.

    Args:
        source: vector to protect
        cfg: split settings
        rng: random stream
        allow_empty: accept a zero-length source

    Returns:
        list: exactly s_spl shares sharing one masked index vector

    Raises:
        InvalidInteractionError: If the source violates the bounds in cfg
    """
    masked = mask_interactions(source, cfg, rng, allow_empty=allow_empty)
    return split_mask(masked, cfg, rng)


def check_shares(shares: Sequence[SplitShare], mask: npt.NDArray[np.int64]) -> bool:
    """True when the shares sum component-wise to the mask exactly."""
    if not shares:
        return False
    total = np.zeros(len(mask), dtype=np.int64)
    for share in shares:
        if share.split.shape != total.shape:
            return False
        total = total + share.split
    return bool(np.array_equal(total, np.asarray(mask, dtype=np.int64)))


# ============================================
# RECONSTRUCTION
# ============================================

def reconstruct(shares: Sequence[SplitShare]) -> InteractionVector:
    """
    Sum the shares and keep the indices whose total is 1.

    Args:
        shares: every share of one source vector

    Returns:
        InteractionVector: the surviving items, ascending

    Raises:
        IncompleteShareSetError: If no shares are given or a summed
            component falls outside {0, 1}
        ShareMixingError: If the shares carry different index vectors
    """
    if not shares:
        raise IncompleteShareSetError("No shares to reconstruct from")

    indices = shares[0].indices
    for share in shares[1:]:
        if not np.array_equal(share.indices, indices):
            raise ShareMixingError("Shares carry different masked index vectors")

    total = np.sum(np.stack([share.split for share in shares]), axis=0)
    invalid = np.flatnonzero((total != 0) & (total != 1))
    if invalid.size:
        raise IncompleteShareSetError(
            f"{invalid.size} of {total.size} summed components are outside {{0, 1}}; "
            f"share set is incomplete ({len(shares)} shares)"
        )
    return InteractionVector.of(np.sort(indices[total == 1]))


# ============================================
# SPECULATION ATTACK
# ============================================

def speculate(shares: Sequence[SplitShare], t: int, n_star: Optional[int] = None) -> SpeculatedVector:
    """
    Sum the first t captured split vectors, as an attacker holding them would.

    Args:
        shares: captured shares, in capture order
        t: how many of them to use
        n_star: vector length, needed only when shares is empty

    Returns:
        The component-wise sum (zero vector for t=0)
    """
    if t < 0 or t > len(shares):
        raise ValueError(f"t must be in [0, {len(shares)}], got {t}")
    if n_star is None:
        if not shares:
            raise ValueError("n_star is required when no shares are given")
        n_star = shares[0].split.size

    total = np.zeros(n_star, dtype=np.int64)
    for share in shares[:t]:
        if share.split.size != n_star:
            raise ValueError(f"Split vector length {share.split.size} does not match n*={n_star}")
        total += share.split
    return total


def jaccard_similarity(spec: SpeculatedVector, mask: npt.ArrayLike) -> float:
    """
    Jaccard similarity between the positions equal to 1 in each vector.

    Both sets empty counts as identical (1.0).
    """
    spec = np.asarray(spec)
    mask = np.asarray(mask)
    if spec.shape != mask.shape:
        raise ValueError(f"Length mismatch: {spec.shape} vs {mask.shape}")

    a = spec == 1
    b = mask == 1
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(a & b)) / union
