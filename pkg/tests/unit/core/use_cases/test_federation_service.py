"""
FederationServiceの単体テスト
"""

import numpy as np
import pytest

from protoshield.adapters.aggregators import MeanAggregator
from protoshield.adapters.optim import AdamW
from protoshield.core.domain.data_domain import ClientSplit
from protoshield.core.domain.federation_domain import Direction, GlobalState
from protoshield.core.domain.prototype_domain import SERVER_ID, Prototype, PrototypeSet
from protoshield.core.domain.train_domain import ClientModel, ClientState, TrainConfig
from protoshield.core.ports.federation_contracts import RoundFailedError
from protoshield.core.use_cases.federation_service import FederationService, transmit
from protoshield.core.use_cases.train_service import LocalTrainer
from tests.mocks.services import RecordingPrivatizer


def upload(client_id, vector, support=1, label=0):
    return PrototypeSet(
        client_id=client_id,
        prototypes=[Prototype(label=label, vector=vector, support=support)],
    )


class TestFederationService:
    """FederationServiceのテストクラス"""

    def setup_method(self):
        self.privatizer = RecordingPrivatizer()
        self.service = FederationService(
            LocalTrainer(AdamW),
            self.privatizer,
            MeanAggregator(),
            TrainConfig(epochs=1, batch_size=32, lr=0.01),
            seed=3,
        )

    def _clients(self, features, n_clients=2):
        rng = np.random.default_rng(0)
        backbone = np.eye(features.dim)
        clients, splits = [], []
        for c in range(n_clients):
            index = np.arange(c, features.n, n_clients)
            part = features.subset(index)
            clients.append(
                ClientState(client_id=c, model=ClientModel.initialize(backbone, 4, 2, rng))
            )
            splits.append(
                ClientSplit(
                    client_id=c,
                    train=part.subset(np.arange(0, part.n, 2)),
                    test=part.subset(np.arange(1, part.n, 2)),
                )
            )
        return clients, splits

    def test_generate_global_mean(self):
        result = self.service.generate_global(
            [upload(0, [1.0, 1.0]), upload(1, [2.0, 2.0])], round=0
        )
        assert result.client_id == SERVER_ID
        np.testing.assert_allclose(result.prototypes[0].vector, [1.5, 1.5])

    def test_generate_global_weights_support(self):
        result = self.service.generate_global(
            [upload(0, [0.0], support=3), upload(1, [4.0], support=1)], round=0
        )
        np.testing.assert_allclose(result.prototypes[0].vector, [1.0])
        assert result.prototypes[0].support == 4

    def test_transmit_preserves_prototypes(self):
        original = upload(2, [0.5, -1.0], support=7, label=3)
        restored = transmit(original)
        assert restored.client_id == 2
        np.testing.assert_array_equal(restored.prototypes[0].vector, [0.5, -1.0])
        assert restored.prototypes[0].support == 7

    def test_run_round(self, separable_features):
        clients, splits = self._clients(separable_features)
        result = self.service.run_round(clients, splits, GlobalState())

        assert result.state.round == 1
        assert len(result.metrics) == 2
        assert len(result.uploads) == 2
        for message in result.uploads:
            assert message.direction == Direction.UPLOAD
            assert isinstance(message.payload, PrototypeSet)
            assert message.payload.classes == [0, 1]
        assert result.broadcast.direction == Direction.DOWNLOAD
        assert result.broadcast.payload.client_id == SERVER_ID
        # 公開機構が受け取るのは埋め込み（d=4）
        assert all(seen.dim == 4 for seen in self.privatizer.seen)
        assert 0.0 <= result.evaluation.mean <= 100.0
        assert result.metrics[0].upload_size == result.uploads[0].payload.wire_size()

    def test_run_rounds(self, separable_features):
        clients, splits = self._clients(separable_features)
        results = list(self.service.run(clients, splits, rounds=3))
        assert [r.state.round for r in results] == [1, 2, 3]
        assert len(results[-1].state.evaluations) == 3
        assert results[-1].state.final == results[-1].evaluation

    def test_rounds_are_reproducible(self, separable_features):
        clients, splits = self._clients(separable_features)
        first = self.service.run_round(clients, splits, GlobalState())
        second = self.service.run_round(clients, splits, GlobalState())
        for a, b in zip(first.uploads, second.uploads):
            np.testing.assert_array_equal(
                a.payload.prototypes[0].vector, b.payload.prototypes[0].vector
            )
        assert first.evaluation == second.evaluation

    def test_client_failure(self, separable_features):
        clients, splits = self._clients(separable_features)
        self.service.privatizer = RecordingPrivatizer(fail_for=1)
        with pytest.raises(RoundFailedError) as exc_info:
            self.service.run_round(clients, splits, GlobalState())
        assert exc_info.value.client_id == 1
        assert exc_info.value.round == 0

    def test_mismatched_splits(self, separable_features):
        clients, splits = self._clients(separable_features)
        with pytest.raises(ValueError, match="data splits"):
            self.service.run_round(clients, splits[:1], GlobalState())

    def test_evaluate(self, separable_features):
        clients, splits = self._clients(separable_features)
        evaluation = self.service.evaluate(clients, splits)
        assert set(evaluation.accuracies) == {0, 1}
