# app/test/services/test_recommender_service.py

import pytest

from app.services.errors import ConfigError, DataError
from app.services.recommender_service import (
    RECOMMENDERS,
    PopularityRecommender,
    RecommenderSpec,
    build_matrix,
    recommend,
)
from app.services.split_service import InteractionVector


@pytest.fixture
def matrix():
    return build_matrix({
        "u1": InteractionVector.of([1, 2]),
        "u2": InteractionVector.of([2, 3]),
        "u3": InteractionVector.of([2, 3, 4]),
        "u4": InteractionVector.of([5]),
    }, n_item=6)


def test_popularity_ranks_by_count_then_index(matrix):
    model = PopularityRecommender(k=3).fit(matrix)
    assert model.ranking == [2, 3, 1, 4, 5, 6]


def test_recommendations_skip_seen_items(matrix):
    recs = recommend(matrix, RecommenderSpec(k=2))
    assert recs["u1"].items == (3, 4)
    assert recs["u4"].items == (2, 3)
    assert all(not (recs[vid].as_set() & matrix.rows[vid].as_set()) for vid in recs)


def test_lists_are_not_padded_when_items_run_out():
    matrix = build_matrix({"a": InteractionVector.of([1, 2]), "b": InteractionVector.of([3])}, n_item=3)
    recs = recommend(matrix, RecommenderSpec(k=2))
    assert recs["a"].items == (3,)
    assert recs["b"].items == (1, 2)


def test_unknown_kind_is_a_config_error(matrix):
    with pytest.raises(ConfigError):
        recommend(matrix, RecommenderSpec(kind="matrix-factorization", k=2))


def test_build_matrix_checks_catalog_bounds():
    with pytest.raises(DataError):
        build_matrix({"a": InteractionVector.of([7])}, n_item=6)


def test_registry_exposes_popularity():
    assert RECOMMENDERS["popularity"] is PopularityRecommender
