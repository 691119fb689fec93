"""
次元ごとの識別性スコアのドメインモデル

クラス内/クラス間分散、ANOVA 正規化スコア、部分空間の分割マスク、
相互情報量による診断
"""

import math
from typing import Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sklearn.metrics import mutual_info_score

from .common import InvalidInputError
from .data_domain import FeatureMatrix

DEFAULT_ZETA = 1e-6
DEFAULT_MI_BINS = 16


class VarianceStats(BaseModel):
    """クラスごとの件数・平均・不偏分散と、全体平均"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    classes: np.ndarray = Field(..., description="クラスラベル (C,)")
    counts: np.ndarray = Field(..., description="n_c (C,)")
    class_means: np.ndarray = Field(..., description="μ_{c,j} (C×d)")
    class_variances: np.ndarray = Field(..., description="s²_{c,j} (C×d)")
    grand_mean: np.ndarray = Field(..., description="μ_j (d,)")

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def n_classes(self) -> int:
        return int(self.classes.shape[0])

    @property
    def dim(self) -> int:
        return int(self.grand_mean.shape[0])

    @property
    def within(self) -> np.ndarray:
        """V^tra_j = Σ_c (n_c−1) s²_{c,j}"""
        return ((self.counts - 1)[:, None] * self.class_variances).sum(axis=0)

    @property
    def between(self) -> np.ndarray:
        """V^ter_j = Σ_c n_c (μ_{c,j} − μ_j)²"""
        gaps = self.class_means - self.grand_mean[None, :]
        return (self.counts[:, None] * gaps**2).sum(axis=0)


class PartitionMask(BaseModel):
    """
    識別的部分空間 I_A とその補集合 I_B

    d_A = ⌈ρd⌉。ρ > 0.5 は警告のうえ受け付ける（実行設定側で拒否する）。
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    index_A: np.ndarray = Field(..., description="I_A（昇順）")
    index_B: np.ndarray = Field(..., description="I_B（昇順）")
    d: int = Field(..., ge=1)
    rho: float = Field(..., gt=0.0, le=1.0)

    @model_validator(mode="after")
    def validate_partition(self) -> "PartitionMask":
        union = np.concatenate([self.index_A, self.index_B])
        if union.shape[0] != self.d or not np.array_equal(
            np.sort(union), np.arange(self.d)
        ):
            raise ValueError("I_A and I_B must partition {0..d-1}")
        if self.index_A.shape[0] < 1:
            raise ValueError("I_A must not be empty")
        return self

    @staticmethod
    def group_size(d: int, rho: float) -> int:
        """d_A = ⌈ρd⌉（丸め誤差で 1 つ多くならないよう補正）"""
        if not 0.0 < rho <= 1.0:
            raise InvalidInputError(f"rho must be in (0, 1]: {rho}")
        return max(1, min(d, math.ceil(rho * d - 1e-9)))

    @classmethod
    def from_selection(cls, selected, d: int, rho: float) -> "PartitionMask":
        """選択された添字集合からマスクを作成"""
        index_A = np.unique(np.asarray(selected, dtype=np.int64))
        index_B = np.setdiff1d(np.arange(d), index_A)
        if rho > 0.5:
            logger.warning(
                f"rho={rho} > 0.5: discriminative group receives more noise than the isotropic reference"
            )
        return cls(index_A=index_A, index_B=index_B, d=d, rho=rho)

    @property
    def d_A(self) -> int:
        return int(self.index_A.shape[0])

    @property
    def d_B(self) -> int:
        return int(self.index_B.shape[0])

    @property
    def kappa_A(self) -> float:
        return math.sqrt(self.d_A / self.d)

    @property
    def kappa_B(self) -> float:
        return math.sqrt(self.d_B / self.d)

    def selected(self) -> np.ndarray:
        """各座標が I_A に含まれるかのブール配列"""
        flags = np.zeros(self.d, dtype=bool)
        flags[self.index_A] = True
        return flags


class DiscriminabilityScorer:
    """
    識別性スコアのドメインサービス

    スコアは F 統計量 S_j = [V^ter_j/(C−1)] / [V^tra_j/(n−C) + ζ]
    """

    @staticmethod
    def variance_stats(features: FeatureMatrix) -> VarianceStats:
        """
        クラスごとの統計量を計算

        Raises:
            InvalidInputError: n ≤ C（F 統計量の分母が定義できない）
        """
        classes, counts = np.unique(features.labels, return_counts=True)
        n, n_classes = features.n, classes.shape[0]
        if n <= n_classes:
            raise InvalidInputError(
                f"need n > C for the F-statistic: n={n}, C={n_classes}"
            )

        means = np.zeros((n_classes, features.dim))
        variances = np.zeros((n_classes, features.dim))
        for i, label in enumerate(classes):
            rows = features.of_class(label)
            means[i] = rows.mean(axis=0)
            # 1件しかないクラスの分散は 0 とする
            if rows.shape[0] > 1:
                variances[i] = rows.var(axis=0, ddof=1)

        return VarianceStats(
            classes=classes,
            counts=counts,
            class_means=means,
            class_variances=variances,
            grand_mean=features.values.mean(axis=0),
        )

    @staticmethod
    def anova_scores(stats: VarianceStats, zeta: float = DEFAULT_ZETA) -> np.ndarray:
        """ANOVA 正規化スコア（長さ d）"""
        if zeta <= 0:
            raise InvalidInputError(f"zeta must be positive: {zeta}")
        n, n_classes = stats.n, stats.n_classes
        if n_classes < 2:
            raise InvalidInputError(f"need at least 2 classes: C={n_classes}")
        if n <= n_classes:
            raise InvalidInputError(f"need n > C: n={n}, C={n_classes}")
        numerator = stats.between / (n_classes - 1)
        denominator = stats.within / (n - n_classes) + zeta
        return numerator / denominator

    @staticmethod
    def clip_scores(scores, H: float) -> np.ndarray:
        """S̄_j = clip(S_j, 0, H)"""
        if H <= 0:
            raise InvalidInputError(f"H must be positive: {H}")
        return np.clip(np.asarray(scores, dtype=np.float64), 0.0, H)

    @staticmethod
    def mutual_information(
        feature_col, labels, bins: int = DEFAULT_MI_BINS
    ) -> float:
        """
        等幅ヒストグラムによる I(z_j; y) のプラグイン推定（nats）

        定数の特徴量や単一クラスでは 0
        """
        if bins < 2:
            raise InvalidInputError(f"bins must be >= 2: {bins}")
        column = np.asarray(feature_col, dtype=np.float64)
        label_arr = np.asarray(labels)
        if column.shape[0] != label_arr.shape[0]:
            raise InvalidInputError("feature/label length mismatch")
        if np.ptp(column) == 0.0 or np.unique(label_arr).shape[0] < 2:
            return 0.0
        edges = np.histogram_bin_edges(column, bins=bins)
        binned = np.digitize(column, edges[1:-1])
        return max(0.0, float(mutual_info_score(label_arr, binned)))

    @classmethod
    def score_table(
        cls,
        features: FeatureMatrix,
        bins: int = DEFAULT_MI_BINS,
        zeta: float = DEFAULT_ZETA,
        mask: Optional[PartitionMask] = None,
    ) -> dict:
        """座標ごとの (S_j, MI_j, selected) 列を返す（診断用）"""
        scores = cls.anova_scores(cls.variance_stats(features), zeta)
        mi = np.array(
            [
                cls.mutual_information(features.values[:, j], features.labels, bins)
                for j in range(features.dim)
            ]
        )
        selected = mask.selected() if mask is not None else np.zeros(features.dim, bool)
        return {
            "coordinate": np.arange(features.dim),
            "score": scores,
            "mutual_information": mi,
            "selected": selected,
        }
