"""
Shared fixtures: temporary stores, manual clocks and assembled engines.
"""

from pathlib import Path

import pytest

from src.core.config import Config, StorageConfig
from src.engine import MemoryEngine
from src.storage.store import Store
from src.utils.clock import ManualClock, US_PER_SECOND
from src.utils.ids import IdFactory

T0 = 1_700_000_000 * US_PER_SECOND


@pytest.fixture
def clock() -> ManualClock:
    """Frozen clock; tests move it explicitly."""
    return ManualClock(T0)


@pytest.fixture
def ticking_clock() -> ManualClock:
    """Clock advancing 1 ms per read, so every write gets a fresh timestamp."""
    return ManualClock(T0, 1_000)


@pytest.fixture
def storage_config(tmp_path: Path) -> StorageConfig:
    return StorageConfig(data_dir=str(tmp_path / "store"), auto_compact_segments=0)


@pytest.fixture
def store(storage_config: StorageConfig, clock: ManualClock):
    s = Store.open(storage_config, clock)
    yield s
    s.close()


@pytest.fixture
def config(tmp_path: Path) -> Config:
    return Config().with_data_dir(tmp_path / "engine")


@pytest.fixture
def engine(config: Config, ticking_clock: ManualClock):
    with MemoryEngine(config, ticking_clock, IdFactory(42)) as e:
        yield e


@pytest.fixture
def ns(engine: MemoryEngine):
    """A namespace with 8-dimensional embeddings."""
    return engine.namespace("test", dim=8)
