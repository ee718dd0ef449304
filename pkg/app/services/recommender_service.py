# app/services/recommender_service.py

"""
Server-side recommendation from aggregated interaction vectors.

Strategies sit behind a small registry; the only one shipped is the
popularity baseline.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Type

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.services.errors import ConfigError, DataError
from app.services.split_service import InteractionVector

logger = logging.getLogger(__name__)


# ============================================
# DOMAIN TYPES
# ============================================

@dataclass
class InteractionMatrix:
    """Aggregated rows keyed by virtual ID over an n_item catalog."""
    n_item: int
    rows: Dict[str, InteractionVector] = field(default_factory=dict)


class RecommenderSpec(BaseModel):
    """Which strategy to run and how many items to recommend per user."""
    model_config = ConfigDict(frozen=True)

    kind: str = Field("popularity", description="Recommendation strategy")
    k: int = Field(10, ge=1, description="Recommendations per user (must not exceed n_max)")


def build_matrix(aggregated: Dict[str, InteractionVector], n_item: int) -> InteractionMatrix:
    """
    Assemble the interaction matrix, checking every index against the catalog.

    Raises:
        DataError: If an item index is outside [1, n_item]
    """
    for vid, vector in aggregated.items():
        bad = [i for i in vector.items if i < 1 or i > n_item]
        if bad:
            raise DataError(f"Row {vid} has item indices outside [1, {n_item}]: {bad[:10]}")
    return InteractionMatrix(n_item=n_item, rows=dict(aggregated))


# ============================================
# STRATEGIES
# ============================================

class Recommender:
    """Base strategy: fit on a matrix, then rank items per user."""

    def __init__(self, k: int):
        self.k = k

    def fit(self, matrix: InteractionMatrix) -> "Recommender":
        raise NotImplementedError

    def recommend_for(self, vid: str) -> InteractionVector:
        raise NotImplementedError


class PopularityRecommender(Recommender):
    """
    Rank items by global interaction count (ties: lower index first) and
    give each user the top k they have not interacted with.
    """

    def fit(self, matrix: InteractionMatrix) -> "PopularityRecommender":
        counts = np.zeros(matrix.n_item + 1, dtype=np.int64)
        for vector in matrix.rows.values():
            if len(vector):
                np.add.at(counts, np.asarray(vector.items, dtype=np.int64), 1)
        items = np.arange(1, matrix.n_item + 1)
        # lexsort sorts by the last key first: count descending, then index ascending
        self.ranking: List[int] = items[np.lexsort((items, -counts[1:]))].tolist()
        self.matrix = matrix
        return self

    def recommend_for(self, vid: str) -> InteractionVector:
        seen = self.matrix.rows[vid].as_set()
        picks: List[int] = []
        for item in self.ranking:
            if item in seen:
                continue
            picks.append(item)
            if len(picks) == self.k:
                break
        return InteractionVector(tuple(picks))


RECOMMENDERS: Dict[str, Type[Recommender]] = {
    "popularity": PopularityRecommender,
}


def recommend(matrix: InteractionMatrix, spec: RecommenderSpec) -> Dict[str, InteractionVector]:
    """
    Produce a recommendation list per virtual ID.

    Lists may be shorter than k when fewer unseen items remain; they are
    never padded.

    Raises:
        ConfigError: If spec.kind is not a known strategy
    """
    strategy_cls = RECOMMENDERS.get(spec.kind)
    if strategy_cls is None:
        raise ConfigError(
            f"Unknown recommender '{spec.kind}'. Available: {', '.join(sorted(RECOMMENDERS))}"
        )

    strategy = strategy_cls(spec.k).fit(matrix)
    recs = {vid: strategy.recommend_for(vid) for vid in matrix.rows}
    logger.info(f"Recommended up to {spec.k} items for {len(recs)} users with '{spec.kind}'")
    return recs
