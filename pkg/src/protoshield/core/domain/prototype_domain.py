"""
プロトタイプ関連のドメインモデル

クリッピング（全体 / 群ごと）、プロトタイプ計算、感度、
IGPP / VPP による公開
"""

from typing import Dict, List, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..utils.numerics import as_matrix, kmeans
from .common import InvalidInputError
from .data_domain import FeatureMatrix
from .privacy_domain import GroupNoiseParams, NoiseMechanisms, ReleaseMechanism
from .scoring_domain import PartitionMask

# client_id, round, class, cluster, support
RECORD_FIELDS = ("client_id", "round", "class", "cluster", "support")
SERVER_ID = -1


class Prototype(BaseModel):
    """1クラス（1クラスタ）分のプロトタイプ"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    label: int = Field(..., ge=0)
    cluster: int = Field(default=0, ge=0)
    vector: np.ndarray
    support: int = Field(..., ge=1, description="寄与したサンプル数")

    @field_validator("vector", mode="before")
    @classmethod
    def validate_vector(cls, v) -> np.ndarray:
        array = np.asarray(v, dtype=np.float64)
        if array.ndim != 1 or array.shape[0] == 0:
            raise ValueError("prototype vector must be a non-empty 1-d array")
        if not np.all(np.isfinite(array)):
            raise ValueError("prototype vector contains non-finite entries")
        return array

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def with_vector(self, vector: np.ndarray) -> "Prototype":
        return Prototype(
            label=self.label, cluster=self.cluster, vector=vector, support=self.support
        )


class PrototypeSet(BaseModel):
    """
    1クライアント・1ラウンドのプロトタイプ集合

    クライアント間でやり取りされる唯一のメッセージ。並びは (class, cluster) 昇順。
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    client_id: int = Field(default=SERVER_ID, ge=SERVER_ID)
    round: int = Field(default=0, ge=0)
    prototypes: List[Prototype] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_prototypes(self) -> "PrototypeSet":
        dims = {p.dim for p in self.prototypes}
        if len(dims) > 1:
            raise ValueError(f"prototypes must share one dimension: {sorted(dims)}")
        keys = [(p.label, p.cluster) for p in self.prototypes]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (class, cluster) entries")
        if keys != sorted(keys):
            raise ValueError("prototypes must be ordered by (class, cluster)")
        return self

    def __len__(self) -> int:
        return len(self.prototypes)

    @property
    def dim(self) -> int:
        return self.prototypes[0].dim if self.prototypes else 0

    @property
    def classes(self) -> List[int]:
        return sorted({p.label for p in self.prototypes})

    def of_class(self, label: int) -> List[Prototype]:
        return [p for p in self.prototypes if p.label == label]

    def class_matrix(self, label: int) -> np.ndarray:
        """クラスのプロトタイプを行に並べた行列（存在しなければ 0 行）"""
        rows = [p.vector for p in self.of_class(label)]
        if not rows:
            return np.zeros((0, self.dim))
        return np.stack(rows)

    def by_class(self) -> Dict[int, np.ndarray]:
        return {label: self.class_matrix(label) for label in self.classes}

    def wire_size(self) -> int:
        """送信される数値の個数（固定フィールド + d）"""
        return len(self.prototypes) * (self.dim + len(RECORD_FIELDS))

    def to_records(self) -> List[Dict[str, float]]:
        """フラットなレコード列（フィールド順は固定）"""
        records = []
        for p in self.prototypes:
            record: Dict[str, float] = {
                "client_id": self.client_id,
                "round": self.round,
                "class": p.label,
                "cluster": p.cluster,
                "support": p.support,
            }
            for j, value in enumerate(p.vector):
                record[f"v{j}"] = float(value)
            records.append(record)
        return records

    @classmethod
    def from_records(cls, records: List[Dict[str, float]]) -> "PrototypeSet":
        """
        to_records の逆変換

        Raises:
            InvalidInputError: レコードの client_id / round が混在している場合
        """
        if not records:
            return cls()
        owners = {(int(r["client_id"]), int(r["round"])) for r in records}
        if len(owners) != 1:
            raise InvalidInputError(f"records from several messages: {sorted(owners)}")
        client_id, round_ = owners.pop()
        dim = sum(1 for key in records[0] if key.startswith("v"))
        prototypes = [
            Prototype(
                label=int(r["class"]),
                cluster=int(r["cluster"]),
                support=int(r["support"]),
                vector=np.array([float(r[f"v{j}"]) for j in range(dim)]),
            )
            for r in records
        ]
        prototypes.sort(key=lambda p: (p.label, p.cluster))
        return cls(client_id=client_id, round=round_, prototypes=prototypes)

    def with_vectors(self, vectors: List[np.ndarray]) -> "PrototypeSet":
        """並びを保ったままベクトルを差し替え"""
        if len(vectors) != len(self.prototypes):
            raise InvalidInputError("vector count does not match prototype count")
        return PrototypeSet(
            client_id=self.client_id,
            round=self.round,
            prototypes=[p.with_vector(v) for p, v in zip(self.prototypes, vectors)],
        )


class ReleaseConfig(BaseModel):
    """公開機構の設定"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mechanism: ReleaseMechanism
    R: float = Field(..., gt=0.0, description="クリッピング半径")
    sigma: float = Field(default=0.0, ge=0.0, description="σ_iso（igpp）")
    mask: Optional[PartitionMask] = None
    params: Optional[GroupNoiseParams] = None

    @model_validator(mode="after")
    def validate_mechanism(self) -> "ReleaseConfig":
        if self.mechanism == ReleaseMechanism.VPP and (
            self.mask is None or self.params is None
        ):
            raise ValueError("vpp release requires a PartitionMask and GroupNoiseParams")
        return self


class PrototypeOps:
    """クリッピング・プロトタイプ計算・公開のドメインサービス"""

    @staticmethod
    def hard_clip(z, R: float) -> np.ndarray:
        """
        ℓ₂ クリッピング z·min(1, R/‖z‖)（行ごと）

        ゼロベクトルはそのまま
        """
        if R <= 0:
            raise InvalidInputError(f"R must be positive: {R}")
        values = np.asarray(z, dtype=np.float64)
        norms = np.linalg.norm(values, axis=-1, keepdims=True)
        scale = np.minimum(1.0, R / np.maximum(norms, np.finfo(np.float64).tiny))
        return values * scale

    @classmethod
    def groupwise_clip(cls, z, mask: PartitionMask, R: float) -> np.ndarray:
        """z_A を R_A = Rκ_A、z_B を R_B = Rκ_B に独立にクリップ"""
        values = np.asarray(z, dtype=np.float64)
        if values.shape[-1] != mask.d:
            raise InvalidInputError(
                f"dimension mismatch: z has {values.shape[-1]}, mask has {mask.d}"
            )
        clipped = values.copy()
        clipped[..., mask.index_A] = cls.hard_clip(values[..., mask.index_A], R * mask.kappa_A)
        if mask.d_B > 0:
            clipped[..., mask.index_B] = cls.hard_clip(
                values[..., mask.index_B], R * mask.kappa_B
            )
        return clipped

    @staticmethod
    def compute_prototypes(
        clipped: FeatureMatrix,
        k_per_class: int,
        rng: np.random.Generator,
        client_id: int = SERVER_ID,
        round: int = 0,
    ) -> PrototypeSet:
        """
        クラス平均（k=1）または k-means 重心（k>1）を計算

        サンプル数が k に満たないクラスは k=1 にフォールバックする
        """
        if k_per_class < 1:
            raise InvalidInputError(f"k_per_class must be positive: {k_per_class}")
        prototypes: List[Prototype] = []
        for label in clipped.classes:
            rows = clipped.of_class(int(label))
            k = k_per_class
            if rows.shape[0] < k:
                logger.warning(
                    f"class {label} has {rows.shape[0]} samples < k={k}; using k=1"
                )
                k = 1
            if k == 1:
                prototypes.append(
                    Prototype(label=int(label), vector=rows.mean(axis=0), support=rows.shape[0])
                )
                continue
            result = kmeans(rows, k, iters=50, rng=rng)
            for cluster in range(k):
                support = int(np.sum(result.assignment == cluster))
                if support == 0:
                    continue
                prototypes.append(
                    Prototype(
                        label=int(label),
                        cluster=cluster,
                        vector=rows[result.assignment == cluster].mean(axis=0),
                        support=support,
                    )
                )
        return PrototypeSet(client_id=client_id, round=round, prototypes=prototypes)

    @staticmethod
    def sensitivity(R: float, support: int) -> float:
        """Δ = 2R/n"""
        if support < 1:
            raise InvalidInputError(f"support must be positive: {support}")
        return 2.0 * R / support

    @classmethod
    def release_igpp(
        cls,
        protos: PrototypeSet,
        R: float,
        sigma_iso: float,
        rng: np.random.Generator,
    ) -> PrototypeSet:
        """各プロトタイプに N(0, (σ_iso Δ)² I) を加える"""
        if sigma_iso < 0:
            raise InvalidInputError(f"sigma must be non-negative: {sigma_iso}")
        vectors = []
        for p in protos.prototypes:
            cls._warn_singleton(p)
            std = sigma_iso * cls.sensitivity(R, p.support)
            vectors.append(NoiseMechanisms.gaussian_mechanism(p.vector, std, rng))
        return protos.with_vectors(vectors)

    @classmethod
    def release_vpp(
        cls,
        protos: PrototypeSet,
        mask: PartitionMask,
        params: GroupNoiseParams,
        R: float,
        rng: np.random.Generator,
    ) -> PrototypeSet:
        """
        I_A に σ_A Δ_A、I_B に σ_B Δ_B の雑音を加える（Δ は各プロトタイプの支持数から）

        Raises:
            InvalidInputError: マスク・パラメータ・次元が一致しない場合
        """
        if protos.prototypes and protos.dim != mask.d:
            raise InvalidInputError(
                f"dimension mismatch: prototypes have {protos.dim}, mask has {mask.d}"
            )
        if not (
            np.isclose(params.kappa_A, mask.kappa_A, rtol=1e-12, atol=0.0)
            and np.isclose(params.kappa_B, mask.kappa_B, rtol=1e-12, atol=0.0)
        ):
            raise InvalidInputError("group noise params do not match the mask")

        flags = mask.selected()
        vectors = []
        for p in protos.prototypes:
            cls._warn_singleton(p)
            delta = cls.sensitivity(R, p.support)
            std = np.where(flags, params.noise_std_A(delta), params.noise_std_B(delta))
            vectors.append(NoiseMechanisms.gaussian_mechanism(p.vector, std, rng))
        return protos.with_vectors(vectors)

    @classmethod
    def release(
        cls, protos: PrototypeSet, config: ReleaseConfig, rng: np.random.Generator
    ) -> PrototypeSet:
        """設定された機構で公開"""
        if config.mechanism == ReleaseMechanism.NONE:
            return protos
        if config.mechanism == ReleaseMechanism.IGPP:
            return cls.release_igpp(protos, config.R, config.sigma, rng)
        return cls.release_vpp(protos, config.mask, config.params, config.R, rng)

    @staticmethod
    def clip_matrix(values, R: float, mask: Optional[PartitionMask] = None) -> np.ndarray:
        """マスクがあれば群ごと、なければ全体でクリップ"""
        matrix = as_matrix(values, "features")
        if mask is None:
            return PrototypeOps.hard_clip(matrix, R)
        return PrototypeOps.groupwise_clip(matrix, mask, R)

    @staticmethod
    def _warn_singleton(p: Prototype) -> None:
        if p.support == 1:
            logger.warning(
                f"releasing class {p.label} cluster {p.cluster} with support 1 (Δ=2R)"
            )
