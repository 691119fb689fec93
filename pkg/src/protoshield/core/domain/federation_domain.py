"""
連合学習ラウンドのドメインモデル
"""

from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .common import InvalidInputError
from .prototype_domain import PrototypeSet


class Direction(str, Enum):
    UPLOAD = "upload"
    DOWNLOAD = "download"


class RoundMessage(BaseModel):
    """
    サーバ・クライアント間のメッセージ

    ペイロードは PrototypeSet のみ（生の特徴量やサンプルは載らない）
    """

    model_config = ConfigDict(frozen=True)

    direction: Direction
    round: int = Field(..., ge=0)
    client_id: Optional[int] = Field(default=None, ge=0)
    payload: PrototypeSet

    @model_validator(mode="after")
    def validate_sender(self) -> "RoundMessage":
        if self.direction == Direction.UPLOAD and self.client_id is None:
            raise ValueError("upload messages require a client_id")
        return self


class RoundMetrics(BaseModel):
    """1ラウンド・1クライアント分の記録"""

    model_config = ConfigDict(frozen=True)

    round: int = Field(..., ge=0)
    client_id: int = Field(..., ge=0)
    accuracy: float = Field(..., ge=0.0, le=100.0)
    ce: float
    proximal: float
    kd: float
    total: float
    mean_pre_clip_norm: float
    logit_gap: float
    n_prototypes: int = Field(..., ge=0)
    upload_size: int = Field(..., ge=0, description="送信した数値の個数")
    d_A: Optional[int] = None


class EvaluationResult(BaseModel):
    """クライアントごとの精度（%）と平均・母標準偏差"""

    model_config = ConfigDict(frozen=True)

    accuracies: Dict[int, float]
    mean: float
    std: float

    @classmethod
    def from_accuracies(cls, accuracies: Dict[int, float]) -> "EvaluationResult":
        if not accuracies:
            raise InvalidInputError("no client accuracies to summarize")
        values = np.array(list(accuracies.values()), dtype=np.float64)
        return cls(
            accuracies=dict(accuracies),
            mean=float(values.mean()),
            std=float(values.std(ddof=0)),
        )


class GlobalState(BaseModel):
    """サーバ側の状態（ラウンド数・グローバルプロトタイプ・記録）"""

    model_config = ConfigDict(frozen=True)

    round: int = Field(default=0, ge=0)
    prototypes: Optional[PrototypeSet] = None
    metrics: List[RoundMetrics] = Field(default_factory=list)
    evaluations: List[EvaluationResult] = Field(default_factory=list)

    def advance(
        self,
        prototypes: PrototypeSet,
        metrics: List[RoundMetrics],
        evaluation: EvaluationResult,
    ) -> "GlobalState":
        """記録は追記のみ"""
        return GlobalState(
            round=self.round + 1,
            prototypes=prototypes,
            metrics=[*self.metrics, *metrics],
            evaluations=[*self.evaluations, evaluation],
        )

    @property
    def final(self) -> Optional[EvaluationResult]:
        return self.evaluations[-1] if self.evaluations else None
