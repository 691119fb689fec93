"""
スコアリング・プロトタイプ公開・集約の契約定義
"""

from typing import List, Optional, Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..domain.common import ProtoShieldError
from ..domain.data_domain import FeatureMatrix
from ..domain.privacy_domain import GroupNoiseParams, ReleaseMechanism
from ..domain.prototype_domain import PrototypeSet
from ..domain.scoring_domain import PartitionMask


# DTOs
class PrivatizeResult(BaseModel):
    """クライアントが送信するプロトタイプと、その生成に使った分割"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mechanism: ReleaseMechanism
    prototypes: PrototypeSet = Field(..., description="公開（送信）されるプロトタイプ")
    mask: Optional[PartitionMask] = None
    params: Optional[GroupNoiseParams] = None


# サービスインターフェース（ポート）
class ScoringServiceProtocol(Protocol):
    """識別的部分空間の私的選択"""

    def private_partition(
        self,
        features: FeatureMatrix,
        rho: float,
        H: float,
        eps1: float,
        rounds: int,
        rng: np.random.Generator,
    ) -> PartitionMask:
        """
        分散統計 → ANOVA スコア → クリップ → Laplace Top-k

        事前条件:
        - 0 < rho ≤ 0.5（超える場合は警告して続行）
        - eps1 > 0

        事後条件:
        - |I_A| = ⌈ρd⌉ の PartitionMask を返す
        """
        ...


class PrivatizerProtocol(Protocol):
    """クリップ → プロトタイプ計算 → 公開 のクライアント側パイプライン"""

    mechanism: ReleaseMechanism

    def privatize(
        self,
        features: FeatureMatrix,
        client_id: int,
        round: int,
        rng: np.random.Generator,
    ) -> PrivatizeResult:
        """
        埋め込みから送信用プロトタイプを作る

        事前条件:
        - features は生の埋め込み（クリップ前）

        事後条件:
        - 返されるプロトタイプはすべて有限値
        - 支持数はクリップ後に寄与したサンプル数

        例外:
        - PrototypeError: 公開に失敗した場合
        """
        ...


class AggregatorProtocol(Protocol):
    """サーバ側のグローバルプロトタイプ生成"""

    def aggregate(
        self, uploads: List[PrototypeSet], round: int, rng: np.random.Generator
    ) -> PrototypeSet:
        """
        アップロードをクラスごとに集約

        事前条件:
        - uploads は 1 件以上

        事後条件:
        - いずれかのアップロードに現れたクラスは必ず 1 個以上のプロトタイプを持つ
        """
        ...


# エラー定義
class ScoringError(ProtoShieldError):
    """スコアリングの基底エラー"""

    code: str = "SCORING_ERROR"


class PrototypeError(ProtoShieldError):
    """プロトタイプ公開・集約の基底エラー"""

    code: str = "PROTOTYPE_ERROR"


class EmptyUploadError(PrototypeError):
    """集約するアップロードがない"""

    code: str = "EMPTY_UPLOAD"
