"""
データ関連のドメインモデル

サンプル行列（入力または埋め込み）とラベル、ドメイン定義、クライアント分割
"""

from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class FeatureMatrix(BaseModel):
    """
    ラベル付き n×d 実数行列（値オブジェクト）

    入力サンプルにも埋め込みにも使う。すべての統計量の基盤。
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray = Field(..., description="n×d の float64 行列")
    labels: np.ndarray = Field(..., description="長さ n の整数ラベル")

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v: np.ndarray) -> np.ndarray:
        array = np.asarray(v, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError(f"values must be 2-d, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("values contain non-finite entries")
        return array

    @field_validator("labels", mode="before")
    @classmethod
    def validate_labels(cls, v: np.ndarray) -> np.ndarray:
        array = np.asarray(v)
        if array.ndim != 1:
            raise ValueError("labels must be 1-d")
        return array.astype(np.int64)

    @model_validator(mode="after")
    def validate_lengths(self) -> "FeatureMatrix":
        if self.values.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"values/labels length mismatch: {self.values.shape[0]} vs {self.labels.shape[0]}"
            )
        return self

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def classes(self) -> np.ndarray:
        """存在するクラス（昇順）"""
        return np.unique(self.labels)

    def class_counts(self) -> Dict[int, int]:
        classes, counts = np.unique(self.labels, return_counts=True)
        return {int(c): int(n) for c, n in zip(classes, counts)}

    def of_class(self, label: int) -> np.ndarray:
        return self.values[self.labels == label]

    def with_values(self, values: np.ndarray) -> "FeatureMatrix":
        """ラベルを保ったまま値を差し替え"""
        return FeatureMatrix(values=values, labels=self.labels)

    def subset(self, index: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(values=self.values[index], labels=self.labels[index])

    @classmethod
    def concat(cls, parts: List["FeatureMatrix"]) -> "FeatureMatrix":
        return cls(
            values=np.concatenate([p.values for p in parts], axis=0),
            labels=np.concatenate([p.labels for p in parts], axis=0),
        )


class DomainSpec(BaseModel):
    """
    合成ドメインの定義（値オブジェクト）

    全ドメイン共通のクラス平均を、ドメイン固有の直交回転 + 平行移動で写す
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = Field(..., min_length=1)
    n_classes: int = Field(..., ge=2)
    input_dim: int = Field(..., ge=1)
    base_means: np.ndarray = Field(..., description="C×input_dim のクラス平均")
    rotation: np.ndarray = Field(..., description="input_dim×input_dim の直交行列")
    shift: np.ndarray = Field(..., description="長さ input_dim の平行移動")
    noise_scale: float = Field(..., gt=0.0)
    samples_per_class: int = Field(..., ge=2)

    @model_validator(mode="after")
    def validate_shapes(self) -> "DomainSpec":
        if self.base_means.shape != (self.n_classes, self.input_dim):
            raise ValueError(
                f"base_means must be {self.n_classes}×{self.input_dim}"
            )
        if self.rotation.shape != (self.input_dim, self.input_dim):
            raise ValueError("rotation must be square input_dim")
        gram = self.rotation @ self.rotation.T
        if not np.allclose(gram, np.eye(self.input_dim), atol=1e-9):
            raise ValueError("rotation must be orthogonal")
        if self.shift.shape != (self.input_dim,):
            raise ValueError("shift must have length input_dim")
        return self

    def min_margin(self) -> float:
        """クラス平均間の最小距離"""
        diffs = self.base_means[:, None, :] - self.base_means[None, :, :]
        distances = np.linalg.norm(diffs, axis=-1)
        return float(np.min(distances[~np.eye(self.n_classes, dtype=bool)]))


class ClientSplit(BaseModel):
    """1クライアント分の学習/テスト分割"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    client_id: int = Field(..., ge=0)
    domain: Optional[str] = None
    train: FeatureMatrix
    test: FeatureMatrix

    @property
    def n_train(self) -> int:
        return self.train.n

    @property
    def n_test(self) -> int:
        return self.test.n
