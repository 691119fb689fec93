"""
連合学習ラウンドの契約定義
"""

from typing import Dict, List, Optional, Protocol

from pydantic import BaseModel, ConfigDict, Field

from ..domain.common import ProtoShieldError
from ..domain.data_domain import ClientSplit
from ..domain.federation_domain import (
    EvaluationResult,
    GlobalState,
    RoundMessage,
    RoundMetrics,
)
from ..domain.prototype_domain import PrototypeSet
from ..domain.scoring_domain import PartitionMask
from ..domain.train_domain import ClientState, LossBreakdown


# DTOs
class TrainingRecord(BaseModel):
    """エポックごとの損失内訳（診断用）"""

    model_config = ConfigDict(frozen=True)

    round: int
    client_id: int
    epoch: int
    loss: LossBreakdown

    def flat(self) -> Dict[str, float]:
        return {
            "round": self.round,
            "client_id": self.client_id,
            "epoch": self.epoch,
            **self.loss.model_dump(),
        }


class RoundResult(BaseModel):
    """1ラウンドの結果"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    clients: List[ClientState]
    state: GlobalState
    uploads: List[RoundMessage]
    broadcast: RoundMessage
    metrics: List[RoundMetrics]
    evaluation: EvaluationResult
    masks: Dict[int, PartitionMask] = Field(default_factory=dict)
    training: List[TrainingRecord] = Field(default_factory=list)


# インターフェース（ポート）
class FederationServiceProtocol(Protocol):
    """ラウンドの実行"""

    def run_round(
        self,
        clients: List[ClientState],
        splits: List[ClientSplit],
        state: GlobalState,
    ) -> RoundResult:
        """
        アップロード → 集約 → 配布 → ローカル学習 → 評価

        事前条件:
        - clients と splits は client_id で対応

        事後条件:
        - state.round が 1 進み、記録が追記される
        - アップロードのペイロードは PrototypeSet のみ

        例外:
        - RoundFailedError: いずれかのクライアントで失敗した場合
        """
        ...

    def generate_global(
        self, uploads: List[PrototypeSet], round: int
    ) -> PrototypeSet:
        """アップロードからグローバルプロトタイプを生成"""
        ...

    def evaluate(
        self, clients: List[ClientState], splits: List[ClientSplit]
    ) -> EvaluationResult:
        """各クライアントの自ドメインのテストデータでの精度"""
        ...


# エラー定義
class FederationError(ProtoShieldError):
    """連合学習の基底エラー"""

    code: str = "FEDERATION_ERROR"


class RoundFailedError(FederationError):
    """ラウンドの途中でクライアントが失敗した"""

    code: str = "ROUND_FAILED"

    def __init__(self, message: str, round: int, client_id: Optional[int] = None):
        super().__init__(f"round {round}, client {client_id}: {message}")
        self.round = round
        self.client_id = client_id
