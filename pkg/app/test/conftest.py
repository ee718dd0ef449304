# app/test/conftest.py

import pytest

from app.dependencies.random_streams import make_rng
from app.services.dataset_service import generate_synthetic
from app.services.recommender_service import RecommenderSpec
from app.services.simnet_service import SimConfig
from app.services.split_service import InteractionVector, SplitConfig


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def small_split():
    """n* = 4 over a 10-item catalog, three shares."""
    return SplitConfig(n_item=10, n_max=2, c=2, s_spl=3)


@pytest.fixture
def medium_split():
    return SplitConfig(n_item=200, n_max=10, c=2, s_spl=5)


@pytest.fixture
def source():
    return InteractionVector.of([3, 7])


@pytest.fixture
def sim_config(medium_split):
    return SimConfig(n_user=30, split=medium_split, alpha=0.9, id_len=7, seed=7)


@pytest.fixture
def sim_data(sim_config):
    return generate_synthetic(sim_config.n_user, sim_config.split.n_item, sim_config.split.n_max, seed=11)


@pytest.fixture
def rec_spec():
    return RecommenderSpec(k=5)


@pytest.fixture
def missing_share_error_rate():
    """Minimum rate of incomplete-share errors with one of 50 shares dropped, over 1000 seeded trials."""
    return 0.999


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    """Keep environment defaults from leaking into tests."""
    import app.dependencies.settings as settings

    monkeypatch.setitem(settings.ENV_FALLBACKS, "out_dir", str(tmp_path / "results"))
    monkeypatch.setitem(settings.ENV_FALLBACKS, "seed", "0")
    monkeypatch.setitem(settings.ENV_FALLBACKS, "log_level", "WARNING")
