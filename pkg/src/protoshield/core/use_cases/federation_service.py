"""
連合学習ラウンドの実装

アップロード → グローバルプロトタイプ生成 → 配布 → ローカル学習 → 評価。
クライアント間で受け渡されるのはシリアライズされた PrototypeSet のみ。
"""

from typing import Iterator, List, Optional

import numpy as np
from loguru import logger

from ..domain.common import InvalidInputError
from ..domain.data_domain import ClientSplit, FeatureMatrix
from ..domain.federation_domain import (
    Direction,
    EvaluationResult,
    GlobalState,
    RoundMessage,
    RoundMetrics,
)
from ..domain.prototype_domain import PrototypeSet
from ..domain.train_domain import ClientState, TrainConfig
from ..ports.federation_contracts import (
    FederationServiceProtocol,
    RoundFailedError,
    RoundResult,
    TrainingRecord,
)
from ..ports.prototype_contracts import AggregatorProtocol, PrivatizerProtocol
from ..ports.train_contracts import LocalTrainerProtocol
from ..utils.numerics import RngStream


def transmit(prototypes: PrototypeSet) -> PrototypeSet:
    """レコード列に直列化して復元する（シミュレートされたネットワーク）"""
    restored = PrototypeSet.from_records(prototypes.to_records())
    if not restored.prototypes:
        return PrototypeSet(client_id=prototypes.client_id, round=prototypes.round)
    return restored


class FederationService(FederationServiceProtocol):
    """連合学習ラウンドの実装"""

    def __init__(
        self,
        trainer: LocalTrainerProtocol,
        privatizer: PrivatizerProtocol,
        aggregator: AggregatorProtocol,
        train_config: TrainConfig,
        seed: int = 0,
    ):
        self.trainer = trainer
        self.privatizer = privatizer
        self.aggregator = aggregator
        self.train_config = train_config
        self.seed = seed

    def _stream(self, *keys: object) -> np.random.Generator:
        return RngStream.derive(self.seed, *keys).generator()

    def generate_global(self, uploads: List[PrototypeSet], round: int) -> PrototypeSet:
        return self.aggregator.aggregate(uploads, round, self._stream("server", round))

    def evaluate(
        self, clients: List[ClientState], splits: List[ClientSplit]
    ) -> EvaluationResult:
        """
        Raises:
            InvalidInputError: テストデータが空のクライアントがある場合
        """
        accuracies = {}
        for client, split in zip(clients, splits):
            if split.test.n == 0:
                raise InvalidInputError(f"client {client.client_id} has an empty test split")
            predicted = self.trainer.predict(client.model, split.test.values, self.train_config)
            accuracies[client.client_id] = float(100.0 * np.mean(predicted == split.test.labels))
        return EvaluationResult.from_accuracies(accuracies)

    def upload(self, client: ClientState, split: ClientSplit, round: int):
        """クライアント側: 埋め込み → 公開 → 送信メッセージ"""
        features = FeatureMatrix(
            values=client.model.encode(split.train.values), labels=split.train.labels
        )
        result = self.privatizer.privatize(
            features,
            client.client_id,
            round,
            self._stream("client", client.client_id, round, "release"),
        )
        message = RoundMessage(
            direction=Direction.UPLOAD,
            round=round,
            client_id=client.client_id,
            payload=transmit(result.prototypes),
        )
        return message, result.mask

    def run_round(
        self,
        clients: List[ClientState],
        splits: List[ClientSplit],
        state: GlobalState,
    ) -> RoundResult:
        round_ = state.round
        if len(clients) != len(splits):
            raise InvalidInputError(
                f"{len(clients)} clients but {len(splits)} data splits"
            )

        uploads: List[RoundMessage] = []
        masks = {}
        for client, split in zip(clients, splits):
            try:
                message, mask = self.upload(client, split, round_)
            except Exception as e:
                logger.error(f"Upload failed for client {client.client_id}: {e}")
                raise RoundFailedError(str(e), round_, client.client_id) from e
            uploads.append(message)
            if mask is not None:
                masks[client.client_id] = mask

        try:
            global_protos = self.generate_global([m.payload for m in uploads], round_)
        except Exception as e:
            logger.error(f"Global prototype generation failed: {e}")
            raise RoundFailedError(str(e), round_) from e
        broadcast = RoundMessage(
            direction=Direction.DOWNLOAD, round=round_, payload=transmit(global_protos)
        )

        updated: List[ClientState] = []
        training: List[TrainingRecord] = []
        for client, split in zip(clients, splits):
            try:
                result = self.trainer.train_epochs(
                    client.model,
                    split.train,
                    broadcast.payload,
                    self.train_config,
                    client.optimizer_state,
                    self._stream("client", client.client_id, round_, "train"),
                )
            except Exception as e:
                logger.error(f"Local training failed for client {client.client_id}: {e}")
                raise RoundFailedError(str(e), round_, client.client_id) from e
            updated.append(
                client.model_copy(
                    update={"model": result.model, "optimizer_state": result.optimizer_state}
                )
            )
            training.extend(
                TrainingRecord(round=round_, client_id=client.client_id, epoch=e, loss=loss)
                for e, loss in enumerate(result.epochs)
            )

        evaluation = self.evaluate(updated, splits)
        last = {r.client_id: r.loss for r in training}
        metrics = [
            RoundMetrics(
                round=round_,
                client_id=client.client_id,
                accuracy=evaluation.accuracies[client.client_id],
                n_prototypes=len(message.payload),
                upload_size=message.payload.wire_size(),
                d_A=masks[client.client_id].d_A if client.client_id in masks else None,
                **last[client.client_id].model_dump(),
            )
            for client, message in zip(updated, uploads)
        ]
        logger.info(
            f"Round {round_}: accuracy {evaluation.mean:.2f} ± {evaluation.std:.2f}"
        )
        return RoundResult(
            clients=updated,
            state=state.advance(broadcast.payload, metrics, evaluation),
            uploads=uploads,
            broadcast=broadcast,
            metrics=metrics,
            evaluation=evaluation,
            masks=masks,
            training=training,
        )

    def run(
        self,
        clients: List[ClientState],
        splits: List[ClientSplit],
        rounds: int,
        state: Optional[GlobalState] = None,
    ) -> Iterator[RoundResult]:
        """rounds 回のラウンドを順に実行し、各ラウンドの結果を返す"""
        state = state or GlobalState()
        for _ in range(rounds):
            result = self.run_round(clients, splits, state)
            clients, state = result.clients, result.state
            yield result
