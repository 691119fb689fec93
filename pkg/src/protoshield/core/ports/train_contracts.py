"""
ローカル学習の契約定義
"""

from typing import Dict, List, Optional, Protocol, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..domain.common import ProtoShieldError
from ..domain.data_domain import FeatureMatrix
from ..domain.prototype_domain import PrototypeSet
from ..domain.train_domain import (
    ClientModel,
    LossBreakdown,
    OptimizerState,
    TrainConfig,
)


# DTOs
class StepResult(BaseModel):
    """1ステップの結果"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    model: ClientModel
    optimizer_state: OptimizerState
    loss: LossBreakdown


class EpochsResult(BaseModel):
    """E エポック分の結果（エポックごとの損失平均）"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    model: ClientModel
    optimizer_state: OptimizerState
    epochs: List[LossBreakdown]


# インターフェース（ポート）
class OptimizerProtocol(Protocol):
    """パラメータ更新則"""

    def step(
        self,
        params: Dict[str, np.ndarray],
        grads: Dict[str, np.ndarray],
        state: OptimizerState,
    ) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
        """
        1ステップ更新

        事前条件:
        - params と grads のキー・形状が一致

        事後条件:
        - 新しいパラメータと状態を返す（入力は変更しない）
        """
        ...


class LocalTrainerProtocol(Protocol):
    """クライアントのローカル学習"""

    def train_step(
        self,
        model: ClientModel,
        x: np.ndarray,
        labels: np.ndarray,
        global_protos: Optional[PrototypeSet],
        cfg: TrainConfig,
        optimizer_state: OptimizerState,
    ) -> StepResult:
        """
        損失 CE + 近接項 + λ₁·KD を逆伝播して更新し、最後に教師を EMA 更新

        例外:
        - TrainingDivergedError: 損失が有限でない場合
        """
        ...

    def train_epochs(
        self,
        model: ClientModel,
        data: FeatureMatrix,
        global_protos: Optional[PrototypeSet],
        cfg: TrainConfig,
        optimizer_state: OptimizerState,
        rng: np.random.Generator,
    ) -> EpochsResult:
        """E エポックのミニバッチ学習"""
        ...

    def predict(self, model: ClientModel, x: np.ndarray, cfg: TrainConfig) -> np.ndarray:
        """生徒ヘッドによる予測ラベル"""
        ...


# エラー定義
class TrainingError(ProtoShieldError):
    """ローカル学習の基底エラー"""

    code: str = "TRAINING_ERROR"


class TrainingDivergedError(TrainingError):
    """損失が発散した"""

    code: str = "TRAINING_DIVERGED"
