"""
自己診断サービスの実装

プライバシー会計と数値計算の性質を実行時に確かめる:
較正、調和条件、ノイズ配分のトレードオフ、Laplace Top-k の DP 比、
感度の総当たり、勾配の正確さ、信号の選択力、スコアと相互情報量の相関
"""

import itertools
import math
import time
from typing import Callable, List, Tuple

import numpy as np
from loguru import logger

from ..domain.data_domain import FeatureMatrix
from ..domain.privacy_domain import NoiseMechanisms, PrivacyAccountant
from ..domain.prototype_domain import Prototype, PrototypeOps, PrototypeSet
from ..domain.scoring_domain import DiscriminabilityScorer, PartitionMask
from ..domain.train_domain import TRAINABLE, ClientModel, TrainConfig
from ..ports.experiment_contracts import SelfTestCheck
from ..utils.numerics import RngStream, finite_diff_grad, relative_error
from .scoring_service import ScoringService
from .train_service import LocalTrainer

CheckResult = Tuple[bool, str]

# Laplace Top-k の DP 比を調べる (d, k)
LAPLACE_DP_SHAPES = ((2, 1), (3, 1), (3, 2), (4, 1), (4, 2))
# これより出現回数の少ない出力集合は比を推定しない
MIN_SET_HITS = 200


def topk_set_frequencies(
    scores: np.ndarray, k: int, lam: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """laplace_topk を n 回引き、出力集合（ビット列で符号化）ごとの頻度を返す"""
    selected = NoiseMechanisms.laplace_topk(np.tile(scores, (n, 1)), k, lam, rng)
    codes = np.sum(np.left_shift(1, selected), axis=1)
    return np.bincount(codes, minlength=2 ** scores.shape[0]) / n


def worst_log_ratio(p: np.ndarray, q: np.ndarray, n: int) -> float:
    """|log(p/q)| - 3·標準誤差 の最大値（十分に観測された集合のみ）"""
    observed = (p * n >= MIN_SET_HITS) & (q * n >= MIN_SET_HITS)
    if not observed.any():
        return -np.inf
    p, q = p[observed], q[observed]
    stderr = np.sqrt((1 - p) / (n * p) + (1 - q) / (n * q))
    return float(np.max(np.abs(np.log(p / q)) - 3 * stderr))


class SelfTestService:
    """自己診断サービスの実装"""

    def __init__(
        self,
        trainer: LocalTrainer,
        seed: int = 0,
        laplace_trials: int = 1_000_000,
        gradient_configs: int = 100,
        selection_seeds: int = 100,
    ):
        self.trainer = trainer
        self.seed = seed
        self.laplace_trials = laplace_trials
        self.gradient_configs = gradient_configs
        self.selection_seeds = selection_seeds

    def _rng(self, *keys: object) -> np.random.Generator:
        return RngStream.derive(self.seed, "selftest", *keys).generator()

    def checks(self) -> List[Tuple[str, Callable[[], CheckResult]]]:
        return [
            ("gaussian calibration", self.check_calibration),
            ("harmonic condition", self.check_harmonic),
            ("noise trade-off", self.check_tradeoff),
            ("laplace top-k dp ratio", self.check_laplace_dp),
            ("prototype sensitivity", self.check_sensitivity),
            ("gradient exactness", self.check_gradients),
            ("signal selection power", self.check_selection_power),
            ("score/mi correlation", self.check_score_mi),
        ]

    def run(self) -> List[SelfTestCheck]:
        results = []
        for name, check in self.checks():
            start = time.perf_counter()
            try:
                passed, detail = check()
            except Exception as e:
                logger.error(f"Self-test {name} raised: {e}")
                passed, detail = False, f"error: {e}"
            seconds = time.perf_counter() - start
            logger.info(f"Self-test {name}: {'ok' if passed else 'FAILED'} ({detail})")
            results.append(
                SelfTestCheck(name=name, passed=passed, detail=detail, seconds=seconds)
            )
        return results

    # 個別チェック

    def check_calibration(self) -> CheckResult:
        sigma = PrivacyAccountant.calibrate_gaussian_sigma
        single, twenty = sigma(1.0, 1e-5, 1), sigma(1.0, 1e-5, 20)
        grid_ok = True
        for eps in (0.5, 1.0, 2.0):
            for delta in (1e-3, 1e-5, 1e-7):
                for rounds in (1, 5, 20):
                    s = sigma(eps, delta, rounds)
                    grid_ok &= sigma(eps * 2, delta, rounds) < s
                    grid_ok &= sigma(eps, delta, rounds + 1) > s
                    grid_ok &= sigma(eps, delta / 10, rounds) > s
        passed = 4.85 <= single <= 4.95 and 21.8 <= twenty <= 22.1 and grid_ok
        return passed, f"sigma(T=1)={single:.4f}, sigma(T=20)={twenty:.4f}, monotone={grid_ok}"

    def check_harmonic(self) -> CheckResult:
        rng = self._rng("harmonic")
        worst = 0.0
        dominance = True
        for _ in range(1000):
            d = int(rng.integers(2, 600))
            rho = float(rng.uniform(1e-3, 0.5))
            k = PartitionMask.group_size(d, rho)
            if k >= d:
                continue
            mask = PartitionMask.from_selection(rng.choice(d, k, replace=False), d, rho)
            sigma_ref = float(rng.uniform(0.1, 50.0))
            params = PrivacyAccountant.group_noise_params(mask, sigma_ref, 1.0)
            gap = abs(params.sigma_A**-2 + params.sigma_B**-2 - sigma_ref**-2) * sigma_ref**2
            worst = max(worst, gap)
            dominance &= PrivacyAccountant.rdp_dominance_check(params, (1.1, 2.0, 10.0, 100.0))
        return worst <= 1e-12 and dominance, f"max relative gap={worst:.2e}"

    def check_tradeoff(self) -> CheckResult:
        ratios = {}
        for rho in np.round(np.arange(0.05, 0.5001, 0.05), 2):
            d_A = PartitionMask.group_size(100, float(rho))
            mask = PartitionMask.from_selection(np.arange(d_A), 100, float(rho))
            params = PrivacyAccountant.group_noise_params(mask, 1.0, 1.0)
            ratios[float(rho)] = params.sigma_A * params.delta_A / (params.sigma_ref * params.delta_iso)
        over = PartitionMask.from_selection(np.arange(60), 100, 0.6)
        reversed_params = PrivacyAccountant.group_noise_params(over, 1.0, 1.0)
        reversed_ratio = reversed_params.sigma_A * reversed_params.delta_A
        passed = (
            all(r <= 1.0 + 1e-12 for r in ratios.values())
            and abs(ratios[0.2] - math.sqrt(0.3)) <= 1e-9
            and reversed_ratio > 1.0
        )
        return passed, f"ratio(rho=0.2)={ratios[0.2]:.6f}, ratio(rho=0.6)={reversed_ratio:.4f}"

    def check_laplace_dp(self) -> CheckResult:
        """
        d ≤ 4, k ∈ {1, 2}, H=1, T=1, ε=1 で laplace_topk の出力集合確率の比を推定

        スコアは頂点 {0, H}^d を列挙する（どの 2 点も座標ごとの差が H 以下で隣接）
        """
        eps, H = 1.0, 1.0
        n = self.laplace_trials
        worst, pairs = -np.inf, 0
        for d, k in LAPLACE_DP_SHAPES:
            lam = PrivacyAccountant.calibrate_laplace_scale(k, H, 1, eps)
            rng = self._rng("laplace", d, k)
            freqs = [
                topk_set_frequencies(np.array(corner), k, lam, n, rng)
                for corner in itertools.product((0.0, H), repeat=d)
            ]
            for p, q in itertools.combinations(freqs, 2):
                worst = max(worst, worst_log_ratio(p, q, n))
                pairs += 1
        return worst <= eps, f"max loss - 3se = {worst:.4f} over {pairs} pairs (eps={eps})"

    def check_sensitivity(self) -> CheckResult:
        rng = self._rng("sensitivity")
        worst = 0.0
        for _ in range(200):
            n, d = int(rng.integers(1, 7)), int(rng.integers(2, 9))
            R = float(rng.uniform(0.5, 3.0))
            rho = float(rng.uniform(0.05, 0.5))
            k = min(PartitionMask.group_size(d, rho), d - 1)
            mask = PartitionMask.from_selection(rng.choice(d, k, replace=False), d, rho)
            data = rng.normal(0.0, 3.0, size=(n, d))
            for clip in (
                lambda z: PrototypeOps.hard_clip(z, R),
                lambda z: PrototypeOps.groupwise_clip(z, mask, R),
            ):
                base = clip(data).mean(axis=0)
                for i in range(n):
                    for candidate in (-data[i] * 10, rng.normal(0.0, 10.0, size=d)):
                        swapped = data.copy()
                        swapped[i] = candidate
                        change = np.linalg.norm(clip(swapped).mean(axis=0) - base)
                        worst = max(worst, change / (2 * R / n))
        return worst <= 1.0 + 1e-9, f"max change / (2R/n) = {worst:.6f}"

    def check_gradients(self) -> CheckResult:
        worst = 0.0
        for i in range(self.gradient_configs):
            rng = self._rng("gradient", i)
            input_dim, hidden = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            embed, n_classes, batch = int(rng.integers(2, 5)), int(rng.integers(2, 4)), int(rng.integers(2, 6))
            model = ClientModel.initialize(
                rng.standard_normal((input_dim, hidden)), embed, n_classes, rng
            ).with_params(
                teacher_W=rng.standard_normal((embed, n_classes)),
                teacher_b=rng.standard_normal(n_classes),
            )
            x = rng.normal(0.0, 2.0, size=(batch, input_dim))
            labels = rng.integers(0, n_classes, size=batch)
            cfg = TrainConfig(
                gamma=float(rng.uniform(0.05, 0.5)),
                tau=float(rng.uniform(1.0, 5.0)),
                lambda1=float(rng.uniform(0.0, 1.0)),
                lambda_proto=float(rng.uniform(0.0, 1.0)),
                clip_radius=float(rng.uniform(0.5, 3.0)),
                dcr=bool(rng.integers(0, 2)),
            )
            protos = PrototypeSet(
                prototypes=[
                    Prototype(label=c, cluster=j, vector=rng.standard_normal(embed), support=1)
                    for c in range(n_classes)
                    for j in range(2)
                ]
            )
            _, grads = self.trainer.loss_and_grads(model, x, labels, protos, cfg)
            for name in TRAINABLE:

                def total(value, name=name):
                    perturbed = model.with_params(**{name: value})
                    return self.trainer.loss_and_grads(perturbed, x, labels, protos, cfg)[0].total

                numeric = finite_diff_grad(total, getattr(model, name).copy(), h=1e-6)
                worst = max(worst, relative_error(grads[name], numeric))
        return worst <= 1e-4, f"max relative error = {worst:.2e}"

    def check_selection_power(self) -> CheckResult:
        """
        1座標だけにクラス信号を埋めたデータで、その座標が I_A に入る頻度

        F 統計量は雑音座標でも 1 前後になるので、H はそれより大きく取る
        """
        d, n, rho, H, eps1 = 16, 2000, 0.25, 10.0, 400.0
        scoring = ScoringService()
        hits = 0
        for s in range(self.selection_seeds):
            rng = self._rng("selection", s)
            labels = rng.integers(0, 2, size=n)
            values = rng.standard_normal((n, d))
            values[:, 0] += np.where(labels == 1, 2.0, -2.0)
            mask = scoring.private_partition(
                FeatureMatrix(values=values, labels=labels), rho, H, eps1, 1, rng
            )
            hits += int(0 in mask.index_A)
        rate = hits / self.selection_seeds
        return rate >= 0.99, f"hit rate {rate:.2f} (H={H}, eps1={eps1})"

    def check_score_mi(self) -> CheckResult:
        rng = self._rng("score_mi")
        n, d = 6000, 16
        labels = rng.integers(0, 2, size=n)
        values = rng.standard_normal((n, d))
        values += np.where(labels == 1, 1.0, -1.0)[:, None] * np.linspace(0.0, 1.5, d)
        frame = ScoringService().score_frame(FeatureMatrix(values=values, labels=labels))
        rho = ScoringService.score_mi_correlation(frame)
        return rho >= 0.7, f"spearman={rho:.3f}"
