"""
AdamW（重み減衰を分離した適応的モーメント推定）

更新式:
    θ ← θ (1 − lr·wd)
    m ← β₁ m + (1−β₁) g,  v ← β₂ v + (1−β₂) g²
    θ ← θ − lr · m̂ / (√v̂ + eps)
"""

from typing import Dict, Tuple

import numpy as np

from ...core.domain.common import InvalidInputError
from ...core.domain.train_domain import OptimizerState
from ...core.ports.train_contracts import OptimizerProtocol


class AdamW(OptimizerProtocol):
    """AdamW オプティマイザ（状態は OptimizerState として外に持つ）"""

    def __init__(
        self,
        lr: float = 1e-3,
        weight_decay: float = 1e-5,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        """
        Args:
            lr: 学習率
            weight_decay: 分離された重み減衰
            betas: モーメントの減衰率 (β₁, β₂)
            eps: 分母の安定化項
        """
        if lr <= 0 or weight_decay < 0 or eps <= 0:
            raise InvalidInputError(
                f"invalid AdamW settings: lr={lr}, weight_decay={weight_decay}, eps={eps}"
            )
        if not all(0.0 <= b < 1.0 for b in betas):
            raise InvalidInputError(f"betas must be in [0, 1): {betas}")
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps

    def step(
        self,
        params: Dict[str, np.ndarray],
        grads: Dict[str, np.ndarray],
        state: OptimizerState,
    ) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
        if params.keys() != grads.keys():
            raise InvalidInputError("params and grads have different names")
        beta1, beta2 = self.betas
        step = state.step + 1
        bias1 = 1.0 - beta1**step
        bias2 = 1.0 - beta2**step

        updated: Dict[str, np.ndarray] = {}
        first: Dict[str, np.ndarray] = {}
        second: Dict[str, np.ndarray] = {}
        for name, value in params.items():
            grad = np.asarray(grads[name], dtype=np.float64)
            if grad.shape != value.shape:
                raise InvalidInputError(
                    f"gradient shape mismatch for {name}: {grad.shape} vs {value.shape}"
                )
            m = state.first_moment.get(name, np.zeros_like(value))
            v = state.second_moment.get(name, np.zeros_like(value))
            m = beta1 * m + (1.0 - beta1) * grad
            v = beta2 * v + (1.0 - beta2) * grad**2
            decayed = value * (1.0 - self.lr * self.weight_decay)
            updated[name] = decayed - self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            first[name] = m
            second[name] = v

        return updated, OptimizerState(step=step, first_moment=first, second_moment=second)
