"""
スコアリングサービスの実装

識別性スコアから Laplace Top-k で識別的部分空間 I_A を私的に選ぶ
"""

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import spearmanr

from ..domain.common import InvalidInputError
from ..domain.data_domain import FeatureMatrix
from ..domain.privacy_domain import NoiseMechanisms, PrivacyAccountant
from ..domain.scoring_domain import (
    DEFAULT_MI_BINS,
    DEFAULT_ZETA,
    DiscriminabilityScorer,
    PartitionMask,
)
from ..ports.prototype_contracts import ScoringError, ScoringServiceProtocol


class ScoringService(ScoringServiceProtocol):
    """スコアリングサービスの実装"""

    def __init__(self, zeta: float = DEFAULT_ZETA):
        self.zeta = zeta

    def clipped_scores(self, features: FeatureMatrix, H: float) -> np.ndarray:
        """
        [0, H] にクリップした識別性スコア

        クラスが 1 つしかない、または n ≤ C のクライアントでは F 統計量が
        定義できないので全座標 0 とする（Top-k は一様な選択になる）
        """
        n_classes = features.classes.shape[0]
        if n_classes < 2 or features.n <= n_classes:
            logger.debug(
                f"Scores undefined for n={features.n}, C={n_classes}; using zero scores"
            )
            return np.zeros(features.dim)
        stats = DiscriminabilityScorer.variance_stats(features)
        scores = DiscriminabilityScorer.anova_scores(stats, self.zeta)
        return DiscriminabilityScorer.clip_scores(scores, H)

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
        分散統計 → ANOVA スコア → [0, H] クリップ → Laplace Top-k

        Args:
            features: 生の埋め込み（クリップ前）
            rho: 識別的部分空間の割合
            H: スコアの上限
            eps1: 分割に割り当てる予算
            rounds: ラウンド数 T（λ は T に比例）
            rng: 乱数生成器

        Returns:
            PartitionMask: |I_A| = ⌈ρd⌉

        Raises:
            InvalidInputError: 入力が事前条件を満たさない場合
        """
        clipped = self.clipped_scores(features, H)

        k = PartitionMask.group_size(features.dim, rho)
        lam = PrivacyAccountant.calibrate_laplace_scale(k, H, rounds, eps1)
        selected = NoiseMechanisms.laplace_topk(clipped, k, lam, rng)
        mask = PartitionMask.from_selection(selected, features.dim, rho)
        logger.debug(f"Private partition: d_A={mask.d_A}, d_B={mask.d_B}, lambda={lam:.2f}")
        return mask

    def score_frame(
        self,
        features: FeatureMatrix,
        mask: PartitionMask = None,
        bins: int = DEFAULT_MI_BINS,
    ) -> pd.DataFrame:
        """座標ごとの (score, mutual_information, selected) 表"""
        try:
            table = DiscriminabilityScorer.score_table(features, bins, self.zeta, mask)
        except InvalidInputError as e:
            raise ScoringError(f"cannot score features: {e}") from e
        return pd.DataFrame(table)

    @staticmethod
    def score_mi_correlation(frame: pd.DataFrame) -> float:
        """スコアと相互情報量の Spearman 相関（定数列なら 0）"""
        if frame["score"].nunique() < 2 or frame["mutual_information"].nunique() < 2:
            return 0.0
        return float(spearmanr(frame["score"], frame["mutual_information"])[0])
