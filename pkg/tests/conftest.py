import numpy as np
import pytest
from loguru import logger

from protoshield.core.domain.data_domain import FeatureMatrix


@pytest.fixture
def caplog(caplog):
    """Fixture to propagate loguru logs to pytest's caplog."""
    handler_id = logger.add(
        caplog.handler,
        format="{message}",
        level="DEBUG",
        # Make sure to use the same handler as caplog
        enqueue=False,  # Or True if you use enqueue in your app
    )
    yield caplog
    logger.remove(handler_id)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def separable_features(rng):
    """座標 0 だけがクラスを分ける 2 クラス・8 次元の埋め込み"""
    labels = np.repeat([0, 1], 60)
    values = rng.standard_normal((120, 8))
    values[:, 0] += np.where(labels == 1, 3.0, -3.0)
    return FeatureMatrix(values=values, labels=labels)
