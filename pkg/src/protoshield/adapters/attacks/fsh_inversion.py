"""
特徴空間ハイジャック（FSH）

公開プロトタイプ p* に埋め込みが一致する入力を勾配法で探す:
    L(x) = ‖φ(x) − p*‖² + λ_TV·TV(x)
x は tanh で [lo, hi] に写した変数 w を最適化する。
"""

from typing import Dict, Tuple

import numpy as np
from loguru import logger

from ...core.domain.attack_domain import FSHMetrics
from ...core.domain.common import InvalidInputError
from ...core.domain.train_domain import OptimizerState
from ...core.ports.attack_contracts import (
    AttackDivergedError,
    EncoderPathProtocol,
    FSHResult,
    InversionAttackProtocol,
)
from ...core.utils.numerics import as_matrix, pairwise_sq_distances
from ..optim.adamw import AdamW


def total_variation(x) -> np.ndarray:
    """行ごとの Σ|x_{i+1} − x_i|"""
    return np.sum(np.abs(np.diff(np.atleast_2d(x), axis=1)), axis=1)


def total_variation_grad(x) -> np.ndarray:
    signs = np.sign(np.diff(np.atleast_2d(x), axis=1))
    grad = np.zeros_like(np.atleast_2d(x), dtype=np.float64)
    grad[:, :-1] -= signs
    grad[:, 1:] += signs
    return grad


def diagonal_frechet(a, b) -> float:
    """
    対角共分散近似のフレシェ距離

    ‖μ₁−μ₂‖² + Σ_j (v₁ + v₂ − 2√(v₁v₂))
    """
    a, b = as_matrix(a, "a"), as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError("feature sets have different dimensions")
    variances = []
    for name, x in (("reconstructions", a), ("clean features", b)):
        if x.shape[0] < 2:
            logger.warning(f"cFFD with a single {name} row; using zero covariance")
            variances.append(np.zeros(x.shape[1]))
        else:
            variances.append(np.var(x, axis=0, ddof=1))
    va, vb = variances
    mean_term = float(np.sum((a.mean(axis=0) - b.mean(axis=0)) ** 2))
    trace_term = float(np.sum(va + vb - 2.0 * np.sqrt(va * vb)))
    return max(mean_term + trace_term, 0.0)


class FSHInversion(InversionAttackProtocol):
    """ホワイトボックスのエンコーダを使う再構成攻撃"""

    def __init__(
        self,
        steps: int = 2000,
        lr: float = 0.01,
        tv_weight: float = 0.0,
        batch_size: int = 16,
        patience: int = 300,
        tolerance: float = 1e-6,
    ):
        if steps < 1 or batch_size < 1 or patience < 1:
            raise InvalidInputError(
                f"invalid FSH settings: steps={steps}, batch={batch_size}, patience={patience}"
            )
        self.steps = steps
        self.lr = lr
        self.tv_weight = tv_weight
        self.batch_size = batch_size
        self.patience = patience
        self.tolerance = tolerance

    def objective(
        self, x: np.ndarray, target: np.ndarray, encoder: EncoderPathProtocol
    ) -> Tuple[float, np.ndarray]:
        """バッチ平均の損失と ∂L/∂x"""
        batch = x.shape[0]
        residual = encoder.encode(x) - target
        loss = np.sum(residual**2, axis=1) + self.tv_weight * total_variation(x)
        grad = encoder.encode_vjp(2.0 * residual)
        if self.tv_weight > 0:
            grad = grad + self.tv_weight * total_variation_grad(x)
        return float(loss.mean()), grad / batch

    def reconstruct(
        self,
        target: np.ndarray,
        encoder: EncoderPathProtocol,
        input_dim: int,
        rng: np.random.Generator,
        bounds: Tuple[float, float] = (0.0, 1.0),
    ) -> FSHResult:
        lo, hi = float(bounds[0]), float(bounds[1])
        if not hi > lo:
            raise InvalidInputError(f"empty input range: {bounds}")
        target = np.asarray(target, dtype=np.float64).reshape(1, -1)
        half = (hi - lo) / 2.0

        def to_input(w: np.ndarray) -> np.ndarray:
            return lo + half * (np.tanh(w) + 1.0)

        optimizer = AdamW(lr=self.lr, weight_decay=0.0)
        state = OptimizerState()
        w = rng.standard_normal((self.batch_size, input_dim))
        best_loss, best_w, wait = np.inf, w.copy(), 0
        step = 0
        stopped_early = False

        for step in range(1, self.steps + 1):
            x = to_input(w)
            loss, grad_x = self.objective(x, target, encoder)
            if not np.isfinite(loss):
                raise AttackDivergedError(f"reconstruction loss diverged at step {step}")
            if loss < best_loss - self.tolerance:
                best_loss, best_w, wait = loss, w.copy(), 0
            else:
                wait += 1
                if wait >= self.patience:
                    stopped_early = True
                    break
            grad_w = grad_x * half * (1.0 - np.tanh(w) ** 2)
            params, state = optimizer.step({"w": w}, {"w": grad_w}, state)
            w = params["w"]

        inputs = to_input(best_w)
        logger.debug(
            f"FSH finished after {step} steps: loss={best_loss:.6f}, early={stopped_early}"
        )
        return FSHResult(
            inputs=inputs,
            features=encoder.encode(inputs),
            loss=float(best_loss),
            steps=step,
            stopped_early=stopped_early,
        )

    def metrics(
        self,
        reconstructions: np.ndarray,
        clean_class_features: np.ndarray,
        reference: np.ndarray,
        class_prototypes: Dict[int, np.ndarray],
        target_class: int,
    ) -> FSHMetrics:
        """
        コサイン類似度（reference に対して）・cFFD・Top-1 一致率

        Raises:
            InvalidInputError: target_class が class_prototypes にない場合
        """
        feats = as_matrix(reconstructions, "reconstructions")
        ref = np.asarray(reference, dtype=np.float64).reshape(-1)
        if target_class not in class_prototypes:
            raise InvalidInputError(f"no clean prototype for class {target_class}")

        norms = np.linalg.norm(feats, axis=1) * np.linalg.norm(ref)
        cosine = np.divide(feats @ ref, norms, out=np.zeros(feats.shape[0]), where=norms > 0)

        labels = sorted(class_prototypes)
        centers = np.stack([np.asarray(class_prototypes[c], dtype=np.float64) for c in labels])
        nearest = np.asarray(labels)[np.argmin(pairwise_sq_distances(feats, centers), axis=1)]

        return FSHMetrics(
            cosine_similarity=float(np.clip(cosine.mean(), -1.0, 1.0)),
            cffd=diagonal_frechet(feats, clean_class_features),
            top1_hit_pct=float(100.0 * np.mean(nearest == target_class)),
        )
