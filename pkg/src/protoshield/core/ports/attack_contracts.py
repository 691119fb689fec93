"""
攻撃評価の契約定義
"""

from typing import Dict, List, Protocol, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..domain.attack_domain import AttackRecord, FSHMetrics, MIAMetrics
from ..domain.common import ProtoShieldError
from ..domain.data_domain import ClientSplit
from ..domain.federation_domain import RoundMessage
from ..domain.train_domain import ClientState


# DTOs
class FSHResult(BaseModel):
    """再構成の結果（最良反復）"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    inputs: np.ndarray = Field(..., description="再構成された入力（batch×input_dim）")
    features: np.ndarray = Field(..., description="再構成入力の埋め込み（batch×d）")
    loss: float
    steps: int = Field(..., ge=0)
    stopped_early: bool = False


# インターフェース（ポート）
class EncoderPathProtocol(Protocol):
    """攻撃者がホワイトボックスで使うエンコーダ"""

    def encode(self, x) -> np.ndarray: ...

    def encode_vjp(self, grad_z) -> np.ndarray: ...


class MembershipAttackProtocol(Protocol):
    """プロトタイプ距離によるメンバーシップ推論"""

    def scores(self, features: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
        """サンプルごとのスコア（大きいほどメンバーらしい）"""
        ...

    def metrics(self, member_scores, nonmember_scores) -> MIAMetrics:
        """
        事前条件:
        - 両方の集合が空でない

        例外:
        - InvalidInputError: 空集合の場合
        """
        ...


class InversionAttackProtocol(Protocol):
    """プロトタイプから入力を再構成する攻撃"""

    def reconstruct(
        self,
        target: np.ndarray,
        encoder: EncoderPathProtocol,
        input_dim: int,
        rng: np.random.Generator,
        bounds: Tuple[float, float] = (0.0, 1.0),
    ) -> FSHResult:
        """
        ‖φ(x) − p*‖² + λ_TV·TV(x) を最小化

        例外:
        - AttackDivergedError: 損失が NaN になった場合
        """
        ...

    def metrics(
        self,
        reconstructions: np.ndarray,
        clean_class_features: np.ndarray,
        reference: np.ndarray,
        class_prototypes: Dict[int, np.ndarray],
        target_class: int,
    ) -> FSHMetrics:
        """コサイン類似度・cFFD・Top-1 一致率"""
        ...


class AttackServiceProtocol(Protocol):
    """1ラウンド分のアップロードに対する攻撃"""

    def attack_round(
        self,
        round: int,
        uploads: List[RoundMessage],
        clients: List[ClientState],
        splits: List[ClientSplit],
        method: str,
        epsilon: float,
        run_fsh: bool,
    ) -> List[AttackRecord]:
        """
        事後条件:
        - アップロードごとに AttackRecord を返す（評価できない指標は None）
        """
        ...


# エラー定義
class AttackError(ProtoShieldError):
    """攻撃評価の基底エラー"""

    code: str = "ATTACK_ERROR"


class AttackDivergedError(AttackError):
    """再構成の損失が発散した"""

    code: str = "ATTACK_DIVERGED"
