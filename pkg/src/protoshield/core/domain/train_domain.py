"""
ローカル学習のドメインモデル

クライアントモデル（固定バックボーン + アダプタ + 分類器 + EMA 教師）と、
DCR（ソフトクリッピング・EMA 更新・蒸留損失）と基本損失の数式
"""

from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import log_softmax

from ..utils.numerics import kl_divergence, pairwise_sq_distances, softmax
from .common import InvalidInputError
from .prototype_domain import PrototypeSet

TRAINABLE = ("adapter_W", "adapter_b", "classifier_W", "classifier_b")


class TrainConfig(BaseModel):
    """ローカル学習のハイパーパラメータ"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(default=0.05, gt=0.0, lt=1.0, description="ソフトクリップ強度 γ")
    beta: float = Field(default=0.999, ge=0.0, lt=1.0, description="EMA モーメンタム β")
    tau: float = Field(default=4.0, gt=0.0, description="蒸留温度 τ")
    lambda1: float = Field(default=0.05, ge=0.0, description="蒸留損失の重み λ₁")
    lambda_proto: float = Field(default=0.1, ge=0.0, description="プロトタイプ近接項の重み")
    lr: float = Field(default=1e-3, gt=0.0)
    weight_decay: float = Field(default=1e-5, ge=0.0)
    epochs: int = Field(default=1, ge=1, description="1ラウンドあたりのエポック数 E")
    batch_size: int = Field(default=32, ge=1)
    clip_radius: float = Field(default=10.0, gt=0.0, description="R")
    dcr: bool = Field(default=True, description="ソフトクリップ + 蒸留を使うか")


class ClientModel(BaseModel):
    """
    クライアントモデル

    z = (x G) W_a + b_a、生徒ロジット = ẑ W_c + b_c、教師ロジット = z W_t + b_t。
    バックボーン G は学習しない。教師は EMA でのみ更新する。
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    backbone: np.ndarray = Field(..., description="input_dim×hidden の固定射影")
    adapter_W: np.ndarray
    adapter_b: np.ndarray
    classifier_W: np.ndarray
    classifier_b: np.ndarray
    teacher_W: np.ndarray
    teacher_b: np.ndarray

    @classmethod
    def initialize(
        cls, backbone: np.ndarray, embed_dim: int, n_classes: int, rng: np.random.Generator
    ) -> "ClientModel":
        """アダプタ・分類器を乱数初期化し、教師を生徒のコピーで始める"""
        hidden = backbone.shape[1]
        adapter_W = rng.standard_normal((hidden, embed_dim)) / np.sqrt(hidden)
        classifier_W = rng.standard_normal((embed_dim, n_classes)) / np.sqrt(embed_dim)
        return cls(
            backbone=backbone,
            adapter_W=adapter_W,
            adapter_b=np.zeros(embed_dim),
            classifier_W=classifier_W,
            classifier_b=np.zeros(n_classes),
            teacher_W=classifier_W.copy(),
            teacher_b=np.zeros(n_classes),
        )

    @property
    def embed_dim(self) -> int:
        return int(self.adapter_W.shape[1])

    @property
    def n_classes(self) -> int:
        return int(self.classifier_W.shape[1])

    def hidden(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.backbone

    def encode(self, x) -> np.ndarray:
        """生の埋め込み z"""
        return self.hidden(x) @ self.adapter_W + self.adapter_b

    def encode_vjp(self, grad_z) -> np.ndarray:
        """∂/∂x（エンコーダは線形なので入力に依存しない）"""
        return np.asarray(grad_z) @ (self.backbone @ self.adapter_W).T

    def trainable(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRAINABLE}

    def teacher(self) -> Dict[str, np.ndarray]:
        return {"W": self.teacher_W, "b": self.teacher_b}

    def with_params(self, **params: np.ndarray) -> "ClientModel":
        return self.model_copy(update=params)


class LossBreakdown(BaseModel):
    """損失の内訳と診断値"""

    model_config = ConfigDict(frozen=True)

    ce: float
    proximal: float
    kd: float
    total: float
    mean_pre_clip_norm: float = Field(..., ge=0.0)
    logit_gap: float = Field(..., ge=0.0, description="教師-生徒ロジットの L2 差（平均）")

    @classmethod
    def average(cls, items: "list[LossBreakdown]") -> "LossBreakdown":
        if not items:
            raise InvalidInputError("nothing to average")
        fields = cls.model_fields.keys()
        return cls(**{f: float(np.mean([getattr(i, f) for i in items])) for f in fields})


class OptimizerState(BaseModel):
    """適応的モーメント推定の状態"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    step: int = Field(default=0, ge=0)
    first_moment: Dict[str, np.ndarray] = Field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = Field(default_factory=dict)


class ClientState(BaseModel):
    """クライアントの状態（モデル・最適化状態）"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    client_id: int = Field(..., ge=0)
    model: ClientModel
    optimizer_state: OptimizerState = Field(default_factory=OptimizerState)


class TrainingOps:
    """DCR と基本損失の数式（ドメインサービス）"""

    @staticmethod
    def soft_clip(z, R: float, gamma: float) -> np.ndarray:
        """ẑ = R z / (‖z‖ + γR)（行ごと）"""
        if R <= 0 or gamma <= 0:
            raise InvalidInputError(f"R and gamma must be positive: R={R}, gamma={gamma}")
        values = np.asarray(z, dtype=np.float64)
        norms = np.linalg.norm(values, axis=-1, keepdims=True)
        return R * values / (norms + gamma * R)

    @staticmethod
    def soft_clip_vjp(z, grad_out, R: float, gamma: float) -> np.ndarray:
        """
        ソフトクリップのヤコビアン（対称）とベクトルの積（行ごと）

        J = s I − R z zᵀ / (n (n+γR)²)、s = R/(n+γR)、n = ‖z‖。n=0 では J = I/γ。
        """
        values = np.atleast_2d(np.asarray(z, dtype=np.float64))
        grads = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
        norms = np.linalg.norm(values, axis=1, keepdims=True)
        denom = norms + gamma * R
        result = (R / denom) * grads
        safe = norms[:, 0] > 0
        if np.any(safe):
            projection = np.sum(values[safe] * grads[safe], axis=1, keepdims=True)
            result[safe] -= (
                R * values[safe] * projection / (norms[safe] * denom[safe] ** 2)
            )
        return result.reshape(np.shape(grad_out))

    @staticmethod
    def ema_update(teacher, student, beta: float):
        """θ_t ← β θ_t + (1−β) θ（辞書なら要素ごと）"""
        if not 0.0 <= beta < 1.0:
            raise InvalidInputError(f"beta must be in [0, 1): {beta}")
        if isinstance(teacher, dict):
            if teacher.keys() != student.keys():
                raise InvalidInputError("teacher/student parameter names differ")
            return {
                key: TrainingOps.ema_update(teacher[key], student[key], beta)
                for key in teacher
            }
        t = np.asarray(teacher, dtype=np.float64)
        s = np.asarray(student, dtype=np.float64)
        if t.shape != s.shape:
            raise InvalidInputError(f"shape mismatch: {t.shape} vs {s.shape}")
        return beta * t + (1.0 - beta) * s

    @staticmethod
    def kd_loss(teacher_logits, student_logits, tau: float) -> float:
        """KL(softmax(y_t/τ) ‖ softmax(y_s/τ))（バッチなら平均）"""
        t = np.asarray(teacher_logits, dtype=np.float64)
        s = np.asarray(student_logits, dtype=np.float64)
        if t.shape != s.shape:
            raise InvalidInputError(f"length mismatch: {t.shape} vs {s.shape}")
        values = kl_divergence(softmax(t, tau), softmax(s, tau))
        return float(np.mean(values))

    @staticmethod
    def kd_grads(teacher_logits, student_logits, tau: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        バッチ平均 KD 損失の (∂/∂y_t, ∂/∂y_s)

        ∂/∂y_s = (p_s − p_t)/τ、∂/∂y_t = p_t ⊙ (log p_t − log p_s − KL)/τ
        """
        t = np.atleast_2d(np.asarray(teacher_logits, dtype=np.float64))
        s = np.atleast_2d(np.asarray(student_logits, dtype=np.float64))
        batch = t.shape[0]
        log_pt = log_softmax(t / tau, axis=1)
        log_ps = log_softmax(s / tau, axis=1)
        pt, ps = np.exp(log_pt), np.exp(log_ps)
        gap = log_pt - log_ps
        kl = np.sum(pt * gap, axis=1, keepdims=True)
        grad_t = pt * (gap - kl) / (tau * batch)
        grad_s = (ps - pt) / (tau * batch)
        return grad_t, grad_s

    @staticmethod
    def nearest_prototypes(
        features: np.ndarray, labels: np.ndarray, global_protos: Optional[PrototypeSet]
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        各サンプルのクラスの最近傍グローバルプロトタイプ

        Returns:
            (targets, has_proto): プロトタイプのないサンプルは has_proto=False
        """
        targets = np.zeros_like(features)
        has_proto = np.zeros(features.shape[0], dtype=bool)
        if global_protos is None or len(global_protos) == 0:
            return targets, has_proto
        for label, matrix in global_protos.by_class().items():
            rows = np.flatnonzero(labels == label)
            if rows.size == 0 or matrix.shape[0] == 0:
                continue
            distances = pairwise_sq_distances(features[rows], matrix)
            targets[rows] = matrix[np.argmin(distances, axis=1)]
            has_proto[rows] = True
        return targets, has_proto

    @classmethod
    def base_loss(
        cls,
        features,
        labels,
        classifier_W: np.ndarray,
        classifier_b: np.ndarray,
        global_protos: Optional[PrototypeSet],
        lambda_proto: float,
    ) -> Tuple[float, float]:
        """
        (CE, λ_proto · 近接項) を返す

        近接項は、クラスのプロトタイプを持つサンプルについての ‖ẑ − p‖² の平均
        """
        z = np.atleast_2d(np.asarray(features, dtype=np.float64))
        y = np.asarray(labels, dtype=np.int64)
        logits = z @ classifier_W + classifier_b
        ce = float(-np.mean(log_softmax(logits, axis=1)[np.arange(len(y)), y]))
        targets, has_proto = cls.nearest_prototypes(z, y, global_protos)
        if not np.any(has_proto):
            return ce, 0.0
        gaps = np.sum((z[has_proto] - targets[has_proto]) ** 2, axis=1)
        return ce, float(lambda_proto * np.mean(gaps))
