"""
プライバシー機構のドメインモデル

予算分割、ガウス雑音の較正（RDP）、群ごとの雑音パラメータ、
ガウス機構と one-shot Laplace Top-k
"""

import math
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .common import InternalError, InvalidInputError, ProtoShieldError
from .scoring_domain import PartitionMask

DEFAULT_ALPHA_GRID: Tuple[float, ...] = (1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0)
HARMONIC_RTOL = 1e-12


class PrivacyError(ProtoShieldError):
    """プライバシー機能の基底エラー"""

    code: str = "PRIVACY_ERROR"


class CalibrationError(PrivacyError, InternalError):
    """較正に失敗（有効な入力では起こらない）"""

    code: str = "CALIBRATION_ERROR"


class ReleaseMechanism(str, Enum):
    """プロトタイプ公開機構"""

    NONE = "none"
    IGPP = "igpp"
    VPP = "vpp"


class Method(str, Enum):
    """
    手法プリセット（公開機構 × DCR の有無）

    none は雑音なしの NoLDP 基準
    """

    NONE = "none"
    IGPP = "igpp"
    IGPP_DCR = "igpp_dcr"
    VPP = "vpp"
    VPDR = "vpdr"

    @property
    def release(self) -> ReleaseMechanism:
        if self in (Method.VPP, Method.VPDR):
            return ReleaseMechanism.VPP
        if self in (Method.IGPP, Method.IGPP_DCR):
            return ReleaseMechanism.IGPP
        return ReleaseMechanism.NONE

    @property
    def dcr(self) -> bool:
        return self in (Method.IGPP_DCR, Method.VPDR)


class PrivacySpec(BaseModel):
    """
    プライバシー契約 (ε, δ, T, r)

    ε₁ = rε は部分空間選択、ε₂ = (1−r)ε はプロトタイプ公開に使う
    """

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(..., gt=0.0, description="総予算 ε")
    delta: float = Field(..., gt=0.0, lt=1.0, description="δ")
    rounds: int = Field(..., ge=1, description="通信ラウンド数 T")
    split_ratio: float = Field(default=0.1, gt=0.0, lt=1.0, description="r")

    @property
    def eps1(self) -> float:
        return self.split_ratio * self.epsilon

    @property
    def eps2(self) -> float:
        # ε₁ + ε₂ = ε を浮動小数でも厳密に保つ
        return self.epsilon - self.eps1


class GroupNoiseParams(BaseModel):
    """群 A / B の雑音乗数と感度"""

    model_config = ConfigDict(frozen=True)

    sigma_ref: float = Field(..., ge=0.0)
    kappa_A: float = Field(..., gt=0.0, le=1.0)
    kappa_B: float = Field(..., gt=0.0, le=1.0)
    w_A: float = Field(..., gt=0.0, lt=1.0)
    w_B: float = Field(..., gt=0.0, lt=1.0)
    sigma_A: float = Field(..., ge=0.0)
    sigma_B: float = Field(..., ge=0.0)
    delta_iso: float = Field(..., ge=0.0)
    delta_A: float = Field(..., ge=0.0)
    delta_B: float = Field(..., ge=0.0)

    @model_validator(mode="after")
    def validate_weights(self) -> "GroupNoiseParams":
        if abs(self.w_A + self.w_B - 1.0) > 1e-12:
            raise ValueError(f"w_A + w_B must be 1: {self.w_A + self.w_B}")
        return self

    def harmonic_gap(self) -> float:
        """1/σ_ref² − (1/σ_A² + 1/σ_B²)（非負なら条件を満たす）"""
        return self.sigma_ref**-2 - (self.sigma_A**-2 + self.sigma_B**-2)

    def noise_std_A(self, sensitivity: float) -> float:
        return self.sigma_A * self.kappa_A * sensitivity

    def noise_std_B(self, sensitivity: float) -> float:
        return self.sigma_B * self.kappa_B * sensitivity


class PrivacyBudget(BaseModel):
    """1クライアント・全ラウンド分の予算計画"""

    model_config = ConfigDict(frozen=True)

    mechanism: ReleaseMechanism
    epsilon: float
    delta: float
    rounds: int
    eps1: float = Field(default=0.0, ge=0.0, description="部分空間選択の予算")
    eps2: float = Field(default=0.0, ge=0.0, description="公開の予算")
    sigma: float = Field(default=0.0, ge=0.0, description="σ_iso または σ_ref")
    laplace_scale: float = Field(default=0.0, ge=0.0, description="λ")
    d_A: Optional[int] = None
    d_B: Optional[int] = None


class PrivacyAccountant:
    """
    プライバシー会計のドメインサービス

    ガウス機構 1 回の RDP は α/(2σ²)、T ラウンドで線形に合成し、
    最適な α で (ε, δ) に変換する
    """

    @staticmethod
    def split_budget(spec: PrivacySpec) -> Tuple[float, float]:
        """(ε₁, ε₂) = (rε, (1−r)ε)"""
        if not 0.0 < spec.split_ratio < 1.0:
            raise InvalidInputError(f"split ratio must be in (0,1): {spec.split_ratio}")
        return spec.eps1, spec.eps2

    @staticmethod
    def calibrate_gaussian_sigma(eps: float, delta: float, rounds: int) -> float:
        """
        T 回合成で (ε, δ) を満たす最小の雑音乗数 σ

        ε = T/(2σ²) + √(2T ln(1/δ))/σ を u = 1/σ の二次方程式として解く

        Raises:
            InvalidInputError: 入力が範囲外の場合
            CalibrationError: 正の根が得られない場合
        """
        if eps <= 0:
            raise InvalidInputError(f"epsilon must be positive: {eps}")
        if not 0.0 < delta < 1.0:
            raise InvalidInputError(f"delta must be in (0,1): {delta}")
        if rounds < 1:
            raise InvalidInputError(f"rounds must be positive: {rounds}")

        a = rounds / 2.0
        b = math.sqrt(2.0 * rounds * math.log(1.0 / delta))
        # 桁落ちを避けた正の根 u = 2ε / (b + √(b² + 4aε))
        u = 2.0 * eps / (b + math.sqrt(b * b + 4.0 * a * eps))
        if not (u > 0.0 and math.isfinite(u)):
            raise CalibrationError(
                f"no positive root for eps={eps}, delta={delta}, T={rounds}"
            )
        return 1.0 / u

    @staticmethod
    def gaussian_rdp(alpha, sigma: float) -> np.ndarray:
        """感度で正規化したガウス機構の RDP 曲線 α/(2σ²)"""
        return np.asarray(alpha, dtype=np.float64) / (2.0 * sigma**2)

    @staticmethod
    def compose_rdp(rdp_curve, rounds: int) -> np.ndarray:
        return np.asarray(rdp_curve, dtype=np.float64) * rounds

    @staticmethod
    def rdp_to_dp(rdp_curve, alphas, delta: float) -> float:
        """ε = min_α [RDP(α) + ln(1/δ)/(α−1)]"""
        alphas_arr = np.asarray(alphas, dtype=np.float64)
        if np.any(alphas_arr <= 1.0):
            raise InvalidInputError("alpha values must be > 1")
        eps = np.asarray(rdp_curve, dtype=np.float64) + math.log(1.0 / delta) / (
            alphas_arr - 1.0
        )
        return float(np.min(eps))

    @classmethod
    def epsilon_spent(
        cls,
        sigma: float,
        rounds: int,
        delta: float,
        alphas: Optional[Sequence[float]] = None,
    ) -> float:
        """
        T ラウンドのガウス公開が消費する ε

        alphas を省略すると連続な最適次数での値を返す
        """
        if alphas is None:
            log_term = math.log(1.0 / delta)
            return rounds / (2.0 * sigma**2) + math.sqrt(2.0 * rounds * log_term) / sigma
        curve = cls.compose_rdp(cls.gaussian_rdp(alphas, sigma), rounds)
        return cls.rdp_to_dp(curve, alphas, delta)

    @staticmethod
    def calibrate_laplace_scale(d_A: int, H: float, rounds: int, eps1: float) -> float:
        """λ = 2 d_A H T / ε₁"""
        if eps1 <= 0:
            raise InvalidInputError(f"eps1 must be positive: {eps1}")
        if d_A < 1 or H <= 0 or rounds < 1:
            raise InvalidInputError(
                f"d_A, H, T must be positive: d_A={d_A}, H={H}, T={rounds}"
            )
        return 2.0 * d_A * H * rounds / eps1

    @staticmethod
    def group_noise_params(
        mask: PartitionMask, sigma_ref: float, delta_iso: float
    ) -> GroupNoiseParams:
        """
        分割から群ごとの重みと雑音乗数を決める

        κ_A = √(d_A/d), κ_B = √(d_B/d), w_A = κ_B/(κ_A+κ_B),
        σ_A = σ_ref/√w_A, σ_B = σ_ref/√w_B（調和条件を等号で満たす）
        """
        if mask.d_A == 0 or mask.d_B == 0:
            raise InvalidInputError(
                f"degenerate partition: d_A={mask.d_A}, d_B={mask.d_B}"
            )
        if sigma_ref <= 0:
            raise InvalidInputError(f"sigma_ref must be positive: {sigma_ref}")
        kappa_A = math.sqrt(mask.d_A / mask.d)
        kappa_B = math.sqrt(mask.d_B / mask.d)
        w_A = kappa_B / (kappa_A + kappa_B)
        w_B = 1.0 - w_A
        return GroupNoiseParams(
            sigma_ref=sigma_ref,
            kappa_A=kappa_A,
            kappa_B=kappa_B,
            w_A=w_A,
            w_B=w_B,
            sigma_A=sigma_ref / math.sqrt(w_A),
            sigma_B=sigma_ref / math.sqrt(w_B),
            delta_iso=delta_iso,
            delta_A=delta_iso * kappa_A,
            delta_B=delta_iso * kappa_B,
        )

    @staticmethod
    def rdp_dominance_check(
        params: GroupNoiseParams, alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID
    ) -> bool:
        """群ごとの最悪 RDP が参照機構の RDP を超えないか"""
        alphas = np.asarray(alpha_grid, dtype=np.float64)
        if np.any(alphas <= 1.0):
            raise InvalidInputError("alpha values must be > 1")
        groupwise = (alphas / 2.0) * (params.sigma_A**-2 + params.sigma_B**-2)
        reference = alphas / (2.0 * params.sigma_ref**2)
        return bool(np.all(groupwise <= reference * (1.0 + HARMONIC_RTOL)))

    @classmethod
    def plan(
        cls,
        spec: PrivacySpec,
        mechanism: ReleaseMechanism,
        d: int,
        rho: float,
        H: float,
    ) -> PrivacyBudget:
        """機構ごとの予算配分と雑音パラメータを決める"""
        if mechanism == ReleaseMechanism.NONE:
            return PrivacyBudget(
                mechanism=mechanism,
                epsilon=spec.epsilon,
                delta=spec.delta,
                rounds=spec.rounds,
            )
        if mechanism == ReleaseMechanism.IGPP:
            sigma = cls.calibrate_gaussian_sigma(spec.epsilon, spec.delta, spec.rounds)
            logger.debug(f"IGPP plan: sigma_iso={sigma:.4f}")
            return PrivacyBudget(
                mechanism=mechanism,
                epsilon=spec.epsilon,
                delta=spec.delta,
                rounds=spec.rounds,
                eps2=spec.epsilon,
                sigma=sigma,
            )

        eps1, eps2 = cls.split_budget(spec)
        d_A = PartitionMask.group_size(d, rho)
        sigma_ref = cls.calibrate_gaussian_sigma(eps2, spec.delta, spec.rounds)
        lam = cls.calibrate_laplace_scale(d_A, H, spec.rounds, eps1)
        logger.debug(
            f"VPP plan: eps1={eps1:.4f}, eps2={eps2:.4f}, "
            f"sigma_ref={sigma_ref:.4f}, lambda={lam:.2f}, d_A={d_A}"
        )
        return PrivacyBudget(
            mechanism=mechanism,
            epsilon=spec.epsilon,
            delta=spec.delta,
            rounds=spec.rounds,
            eps1=eps1,
            eps2=eps2,
            sigma=sigma_ref,
            laplace_scale=lam,
            d_A=d_A,
            d_B=d - d_A,
        )


class NoiseMechanisms:
    """雑音付加機構のドメインサービス"""

    @staticmethod
    def gaussian_mechanism(
        value, noise_std, rng: np.random.Generator
    ) -> np.ndarray:
        """
        座標ごとの標準偏差で独立なガウス雑音を加える

        Raises:
            InvalidInputError: 標準偏差が負、または形状が値に合わない場合
        """
        value_arr = np.asarray(value, dtype=np.float64)
        std_arr = np.asarray(noise_std, dtype=np.float64)
        try:
            std = np.broadcast_to(std_arr, value_arr.shape)
        except ValueError as e:
            raise InvalidInputError(
                f"noise std shape {std_arr.shape} does not match value shape {value_arr.shape}"
            ) from e
        if np.any(std < 0):
            raise InvalidInputError("noise std must be non-negative")
        return value_arr + std * rng.standard_normal(value_arr.shape)

    @staticmethod
    def laplace_topk(
        scores, k: int, lam: float, rng: np.random.Generator
    ) -> np.ndarray:
        """
        one-shot Laplace Top-k

        score_j + Lap(λ) の上位 k 個の添字を昇順で返す（同値は小さい添字優先）。
        scores が (n, d) のときは各行を独立な試行とみなし (n, k) を返す
        """
        values = np.asarray(scores, dtype=np.float64)
        if values.ndim not in (1, 2):
            raise InvalidInputError(f"scores must be 1-D or 2-D: ndim={values.ndim}")
        d = values.shape[-1]
        if k < 1 or k > d:
            raise InvalidInputError(f"k must be in [1, {d}]: {k}")
        if lam < 0:
            raise InvalidInputError(f"lambda must be non-negative: {lam}")
        noisy = values + rng.laplace(0.0, lam, size=values.shape) if lam > 0 else values
        # 安定ソートなので同値は小さい添字が先に来る
        order = np.argsort(-noisy, axis=-1, kind="stable")
        return np.sort(order[..., :k], axis=-1)
