"""
分散適応型のプロトタイプ公開（VPP）

私的分割 → 群ごとのクリップ → プロトタイプ計算 → 群ごとの異方性ガウス雑音
"""

import numpy as np
from loguru import logger

from ...core.domain.common import InvalidInputError
from ...core.domain.data_domain import FeatureMatrix
from ...core.domain.privacy_domain import PrivacyAccountant, ReleaseMechanism
from ...core.domain.prototype_domain import PrototypeOps
from ...core.ports.prototype_contracts import (
    PrivatizeResult,
    PrivatizerProtocol,
    ScoringServiceProtocol,
)


class VariancePrivatizer(PrivatizerProtocol):
    """VPP 公開"""

    mechanism = ReleaseMechanism.VPP

    def __init__(
        self,
        scoring_service: ScoringServiceProtocol,
        R: float,
        sigma_ref: float,
        rho: float,
        H: float,
        eps1: float,
        rounds: int,
        k_per_class: int = 1,
    ):
        """
        Args:
            scoring_service: 私的分割を行うサービス
            R: クリッピング半径（R_A = Rκ_A, R_B = Rκ_B）
            sigma_ref: ε₂ で較正した参照雑音乗数
            rho: 識別的部分空間の割合
            H: スコアの上限
            eps1: 分割の予算
            rounds: ラウンド数 T
            k_per_class: クラスあたりのプロトタイプ数
        """
        if R <= 0 or sigma_ref < 0:
            raise InvalidInputError(f"invalid release settings: R={R}, sigma={sigma_ref}")
        self.scoring_service = scoring_service
        self.R = R
        self.sigma_ref = sigma_ref
        self.rho = rho
        self.H = H
        self.eps1 = eps1
        self.rounds = rounds
        self.k_per_class = k_per_class

    def privatize(
        self,
        features: FeatureMatrix,
        client_id: int,
        round: int,
        rng: np.random.Generator,
    ) -> PrivatizeResult:
        # スコアはクリップ前の埋め込みから計算する
        mask = self.scoring_service.private_partition(
            features, self.rho, self.H, self.eps1, self.rounds, rng
        )
        clipped = features.with_values(
            PrototypeOps.groupwise_clip(features.values, mask, self.R)
        )
        protos = PrototypeOps.compute_prototypes(
            clipped, self.k_per_class, rng, client_id=client_id, round=round
        )
        min_support = min(p.support for p in protos.prototypes)
        params = PrivacyAccountant.group_noise_params(
            mask, self.sigma_ref, PrototypeOps.sensitivity(self.R, min_support)
        )
        released = PrototypeOps.release_vpp(protos, mask, params, self.R, rng)
        logger.debug(
            f"client {client_id} round {round}: d_A={mask.d_A}, "
            f"sigma_A={params.sigma_A:.3f}, sigma_B={params.sigma_B:.3f}"
        )
        return PrivatizeResult(
            mechanism=self.mechanism, prototypes=released, mask=mask, params=params
        )
