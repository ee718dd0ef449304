# app/test/services/test_split_service.py

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.dependencies.random_streams import make_rng
from app.services.errors import (
    ConfigError,
    IncompleteShareSetError,
    InvalidInteractionError,
    ShareMixingError,
    build_model,
)
from app.services.split_service import (
    InteractionVector,
    SplitConfig,
    SplitShare,
    check_shares,
    jaccard_similarity,
    mask_interactions,
    reconstruct,
    speculate,
    split_mask,
    split_vector,
)


# ============================================
# CONFIG
# ============================================

def test_n_star_is_derived():
    cfg = SplitConfig(n_item=2000, n_max=50, c=2, s_spl=50)
    assert cfg.n_star == 100


@pytest.mark.parametrize("values", [
    {"n_item": 100, "n_max": 50, "c": 2, "s_spl": 3},   # c * n_max == n_item
    {"n_item": 100, "n_max": 10, "c": 1, "s_spl": 3},
    {"n_item": 100, "n_max": 10, "c": 2, "s_spl": 0},
])
def test_invalid_config_is_rejected(values):
    with pytest.raises(ConfigError):
        build_model(SplitConfig, **values)


def test_interaction_vector_rejects_duplicates():
    with pytest.raises(InvalidInteractionError):
        InteractionVector.of([1, 2, 2])


# ============================================
# MASKING AND SPLITTING
# ============================================

def test_mask_hides_source_among_distinct_fakes(small_split, source, rng):
    masked = mask_interactions(source, small_split, rng)

    assert masked.indices.size == masked.mask.size == small_split.n_star
    assert len(set(masked.indices.tolist())) == small_split.n_star
    assert int(masked.mask.sum()) == len(source)
    assert set(masked.indices[masked.mask == 1].tolist()) == {3, 7}
    fakes = set(masked.indices[masked.mask == 0].tolist())
    assert fakes <= {1, 2, 4, 5, 6, 8, 9, 10}


def test_split_shares_sum_to_mask(small_split, source, rng):
    masked = mask_interactions(source, small_split, rng)
    shares = split_mask(masked, small_split, rng)

    assert len(shares) == small_split.s_spl
    assert all(np.array_equal(s.indices, masked.indices) for s in shares)
    assert check_shares(shares, masked.mask)


def test_single_share_equals_mask(source, rng):
    cfg = SplitConfig(n_item=10, n_max=2, c=2, s_spl=1)
    masked = mask_interactions(source, cfg, rng)
    (share,) = split_mask(masked, cfg, rng)
    assert np.array_equal(share.split, masked.mask)


def test_split_values_stay_within_bound(rng):
    cfg = SplitConfig(n_item=500, n_max=20, c=3, s_spl=40)
    source = InteractionVector.of(range(1, 21))
    for share in split_vector(source, cfg, rng):
        assert np.abs(share.split).max() <= cfg.s_spl + 2


def test_shares_are_read_only(small_split, source, rng):
    share = split_vector(source, small_split, rng)[0]
    with pytest.raises(ValueError):
        share.split[0] = 5


@pytest.mark.parametrize("items", [[], [1, 2, 3], [0, 1], [11]])
def test_split_rejects_invalid_sources(small_split, rng, items):
    with pytest.raises(InvalidInteractionError):
        split_vector(InteractionVector.of(items), small_split, rng)


def test_empty_source_allowed_for_recommendations(small_split, rng):
    shares = split_vector(InteractionVector(()), small_split, rng, allow_empty=True)
    assert reconstruct(shares).items == ()


def test_same_seed_same_shares(small_split, source):
    first = split_vector(source, small_split, make_rng(3))
    second = split_vector(source, small_split, make_rng(3))
    assert [s.fingerprint() for s in first] == [s.fingerprint() for s in second]


def test_fake_indices_are_uniform():
    # 2 real items, 2 fakes from 8 candidates; each candidate should be picked 1/4 of the time
    from scipy.stats import chisquare

    cfg = SplitConfig(n_item=10, n_max=2, c=2, s_spl=2)
    source = InteractionVector.of([3, 7])
    rng = make_rng(99)
    counts = dict.fromkeys([1, 2, 4, 5, 6, 8, 9, 10], 0)
    for _ in range(4000):
        masked = mask_interactions(source, cfg, rng)
        for item in masked.indices[masked.mask == 0].tolist():
            counts[item] += 1
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_real_items_land_uniformly_over_positions():
    from scipy.stats import chisquare

    cfg = SplitConfig(n_item=40, n_max=5, c=2, s_spl=2)
    source = InteractionVector.of([3, 17, 29])
    counts = np.zeros(cfg.n_star, dtype=np.int64)
    for seed in range(10_000):
        masked = mask_interactions(source, cfg, make_rng(seed))
        positions = np.flatnonzero(masked.mask)
        assert set(masked.indices[positions].tolist()) == {3, 17, 29}
        counts[positions] += 1
    assert counts.sum() == 30_000
    assert chisquare(counts).pvalue > 0.01


# ============================================
# RECONSTRUCTION
# ============================================

@settings(max_examples=60, deadline=None)
@given(
    items=st.sets(st.integers(min_value=1, max_value=200), min_size=1, max_size=10),
    s_spl=st.integers(min_value=1, max_value=30),
    seed=st.integers(min_value=0, max_value=2 ** 64 - 1),
)
def test_reconstruct_round_trip(items, s_spl, seed):
    cfg = SplitConfig(n_item=200, n_max=10, c=3, s_spl=s_spl)
    source = InteractionVector.of(sorted(items))
    shares = split_vector(source, cfg, make_rng(seed))
    assert reconstruct(shares).as_set() == source.as_set()


def test_reconstruct_is_order_independent(medium_split, rng):
    source = InteractionVector.of([5, 50, 150])
    shares = split_vector(source, medium_split, rng)
    assert reconstruct(shares[::-1]).items == reconstruct(shares).items == (5, 50, 150)


def test_reconstruct_without_shares_fails():
    with pytest.raises(IncompleteShareSetError):
        reconstruct([])


def test_reconstruct_with_missing_share_fails():
    cfg = SplitConfig(n_item=400, n_max=20, c=2, s_spl=10)
    shares = split_vector(InteractionVector.of(range(1, 21)), cfg, make_rng(5))
    # all 40 partial sums would have to land in {0, 1} for this to pass
    with pytest.raises(IncompleteShareSetError):
        reconstruct(shares[1:])


def test_missing_share_error_rate(missing_share_error_rate):
    cfg = SplitConfig(n_item=2000, n_max=50, c=2, s_spl=50)
    failures = 0
    for trial in range(1000):
        rng = make_rng(trial)
        source = InteractionVector.of(np.sort(rng.choice(np.arange(1, 2001), size=10, replace=False)))
        shares = split_vector(source, cfg, rng)
        dropped = trial % cfg.s_spl
        try:
            reconstruct(shares[:dropped] + shares[dropped + 1:])
        except IncompleteShareSetError:
            failures += 1
    assert failures / 1000 >= missing_share_error_rate


def test_reconstruct_rejects_mixed_shares(small_split, rng):
    a = split_vector(InteractionVector.of([1, 2]), small_split, rng)
    b = split_vector(InteractionVector.of([3, 4]), small_split, rng)
    mixed = a[:2] + [SplitShare(split=b[2].split, indices=b[2].indices)]
    if np.array_equal(a[0].indices, b[0].indices):
        pytest.skip("index vectors coincided")
    with pytest.raises(ShareMixingError):
        reconstruct(mixed)


# ============================================
# SPECULATION
# ============================================

def test_speculation_with_all_shares_recovers_mask(medium_split, rng):
    masked = mask_interactions(InteractionVector.of([1, 2, 3]), medium_split, rng)
    shares = split_mask(masked, medium_split, rng)
    assert jaccard_similarity(speculate(shares, medium_split.s_spl), masked.mask) == 1.0


def test_speculation_with_no_shares_scores_zero(medium_split, rng):
    masked = mask_interactions(InteractionVector.of([1, 2, 3]), medium_split, rng)
    shares = split_mask(masked, medium_split, rng)
    assert jaccard_similarity(speculate(shares, 0), masked.mask) == 0.0


def test_speculate_needs_n_star_without_shares():
    with pytest.raises(ValueError):
        speculate([], 0)
    assert speculate([], 0, n_star=4).tolist() == [0, 0, 0, 0]


def test_speculate_rejects_t_out_of_range(small_split, source, rng):
    shares = split_vector(source, small_split, rng)
    with pytest.raises(ValueError):
        speculate(shares, small_split.s_spl + 1)


@pytest.mark.parametrize("spec,mask,expected", [
    ([1, 0, 1, 0], [1, 0, 1, 0], 1.0),
    ([1, 1, 0, 0], [1, 0, 1, 0], 1 / 3),
    ([2, -1, 0, 0], [1, 0, 1, 0], 0.0),
    ([0, 0, 0, 0], [0, 0, 0, 0], 1.0),
])
def test_jaccard_counts_positions_equal_to_one(spec, mask, expected):
    assert jaccard_similarity(np.array(spec), np.array(mask)) == pytest.approx(expected)


def test_jaccard_rejects_length_mismatch():
    with pytest.raises(ValueError):
        jaccard_similarity(np.zeros(3), np.zeros(4))
