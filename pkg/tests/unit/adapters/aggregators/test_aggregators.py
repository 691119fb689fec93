"""
グローバルプロトタイプ集約の単体テスト
"""

import numpy as np
import pytest

from protoshield.adapters.aggregators import AggregatorFactory, KMeansAggregator, MeanAggregator
from protoshield.core.domain.prototype_domain import SERVER_ID, Prototype, PrototypeSet
from protoshield.core.ports.prototype_contracts import EmptyUploadError


def upload(client_id, *entries):
    """entries: (label, vector, support)"""
    return PrototypeSet(
        client_id=client_id,
        prototypes=[
            Prototype(label=label, vector=vector, support=support)
            for label, vector, support in entries
        ],
    )


class TestMeanAggregator:
    """MeanAggregatorのテストクラス"""

    def setup_method(self):
        self.aggregator = MeanAggregator()
        self.rng = np.random.default_rng(0)

    def test_equal_support(self):
        result = self.aggregator.aggregate(
            [upload(0, (0, [1.0, 1.0], 1)), upload(1, (0, [2.0, 2.0], 1))], 4, self.rng
        )
        assert result.client_id == SERVER_ID
        assert result.round == 4
        np.testing.assert_allclose(result.prototypes[0].vector, [1.5, 1.5])

    def test_class_seen_by_one_client(self):
        result = self.aggregator.aggregate(
            [upload(0, (0, [1.0], 2)), upload(1, (0, [3.0], 2), (2, [5.0], 1))], 0, self.rng
        )
        assert result.classes == [0, 2]
        np.testing.assert_allclose(result.class_matrix(2), [[5.0]])

    def test_empty(self):
        with pytest.raises(EmptyUploadError):
            self.aggregator.aggregate([], 0, self.rng)


class TestKMeansAggregator:
    """KMeansAggregatorのテストクラス"""

    def setup_method(self):
        self.rng = np.random.default_rng(0)

    def test_two_clusters_per_class(self):
        uploads = [
            upload(0, (0, [0.0, 0.0], 1)),
            upload(1, (0, [0.2, 0.0], 1)),
            upload(2, (0, [10.0, 10.0], 1)),
            upload(3, (0, [10.2, 10.0], 1)),
        ]
        result = KMeansAggregator(k_global=2).aggregate(uploads, 0, self.rng)
        centers = sorted(result.class_matrix(0).tolist())
        np.testing.assert_allclose(centers, [[0.1, 0.0], [10.1, 10.0]])
        assert sum(p.support for p in result.prototypes) == 4

    def test_fewer_uploads_than_k(self, caplog):
        result = KMeansAggregator(k_global=3).aggregate([upload(0, (1, [1.0], 1))], 0, self.rng)
        assert len(result) == 1
        assert "k_global=3" in caplog.text

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            KMeansAggregator(k_global=0)


class TestAggregatorFactory:
    """AggregatorFactoryのテストクラス"""

    def test_for_k(self):
        assert isinstance(AggregatorFactory.for_k(1), MeanAggregator)
        kmeans = AggregatorFactory.for_k(3)
        assert isinstance(kmeans, KMeansAggregator)
        assert kmeans.k_global == 3

    def test_unknown(self):
        with pytest.raises(ValueError, match="Unknown aggregator method"):
            AggregatorFactory.create("median")

    def test_available(self):
        assert AggregatorFactory.get_available_methods() == ["mean", "kmeans"]
