from collections.abc import Iterator
from pathlib import Path

import pytest

from clickstats.config import get_settings
from clickstats.datamodel import DetectorConfig, MultiplexConfig
from clickstats.network import custom_config, ring_resonator

EXAMPLE_CONFIGS: Path = Path(__file__).parent.parent / "example_configs"


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> Iterator[None]:
    # Settings read the working directory; keep a stray clickstats.yaml or .env out of the tests
    monkeypatch.chdir(tmp_path)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def example_configs() -> Path:
    return EXAMPLE_CONFIGS


@pytest.fixture
def ring10() -> MultiplexConfig:
    return ring_resonator(0.6, 10)


@pytest.fixture
def ideal10() -> DetectorConfig:
    return DetectorConfig.uniform(10)


@pytest.fixture
def unbalanced3() -> tuple[MultiplexConfig, DetectorConfig]:
    return custom_config([0.5, 0.3, 0.15], tail_loss=0.05), DetectorConfig(eta=[0.9, 0.8, 0.95], nu=[0.0, 0.01, 0.02])
