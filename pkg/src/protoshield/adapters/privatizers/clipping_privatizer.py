"""
全体クリッピングによるプロトタイプ公開（NoLDP / IGPP）

ハードクリップ → プロトタイプ計算 → 等方ガウス雑音（σ_iso = 0 なら雑音なし）
"""

import numpy as np
from loguru import logger

from ...core.domain.common import InvalidInputError
from ...core.domain.data_domain import FeatureMatrix
from ...core.domain.privacy_domain import ReleaseMechanism
from ...core.domain.prototype_domain import PrototypeOps
from ...core.ports.prototype_contracts import PrivatizeResult, PrivatizerProtocol


class IsotropicPrivatizer(PrivatizerProtocol):
    """IGPP 公開"""

    mechanism = ReleaseMechanism.IGPP

    def __init__(self, R: float, sigma: float, k_per_class: int = 1):
        """
        Args:
            R: クリッピング半径
            sigma: 雑音乗数 σ_iso
            k_per_class: クラスあたりのプロトタイプ数
        """
        if R <= 0 or sigma < 0:
            raise InvalidInputError(f"invalid release settings: R={R}, sigma={sigma}")
        self.R = R
        self.sigma = sigma
        self.k_per_class = k_per_class

    def privatize(
        self,
        features: FeatureMatrix,
        client_id: int,
        round: int,
        rng: np.random.Generator,
    ) -> PrivatizeResult:
        clipped = features.with_values(PrototypeOps.hard_clip(features.values, self.R))
        protos = PrototypeOps.compute_prototypes(
            clipped, self.k_per_class, rng, client_id=client_id, round=round
        )
        released = PrototypeOps.release_igpp(protos, self.R, self.sigma, rng)
        logger.debug(
            f"client {client_id} round {round}: {len(released)} prototypes, sigma={self.sigma:.3f}"
        )
        return PrivatizeResult(mechanism=self.mechanism, prototypes=released)


class ClipOnlyPrivatizer(IsotropicPrivatizer):
    """雑音なし（NoLDP 基準）。クリッピングのみ行う"""

    mechanism = ReleaseMechanism.NONE

    def __init__(self, R: float, k_per_class: int = 1):
        super().__init__(R=R, sigma=0.0, k_per_class=k_per_class)
