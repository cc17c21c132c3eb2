"""Shared fixtures: the default config and the cached selection-rate table."""

from pathlib import Path

import pytest

from csitbudget import SystemConfig
from csitbudget.montecarlo import RzfCache

CACHE_PATH = Path(__file__).parent / ".cache" / "rzf_test_cache.json"

RZF_BLOCKS = 100_000
RZF_SEED = 20_000


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def rzf_table():
    """Per-user greedy-selection rates for K = 4..31 at the default config.

    Computed once per session (file-cached across sessions) at the batch
    size the acceptance criteria call for.
    """
    cache = RzfCache(CACHE_PATH)
    return {k: cache.get_or_compute(4, 10.0, k, RZF_BLOCKS, seed=RZF_SEED + k).mean
            for k in range(4, 32)}
