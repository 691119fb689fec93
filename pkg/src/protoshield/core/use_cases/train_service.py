"""
ローカル学習サービスの実装

損失 L = CE + λ_proto·近接項 + λ₁·KD の順伝播と手書きの逆伝播、
オプティマイザによる更新と EMA 教師の更新
"""

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.special import log_softmax

from ..domain.data_domain import FeatureMatrix
from ..domain.prototype_domain import PrototypeSet
from ..domain.train_domain import (
    ClientModel,
    LossBreakdown,
    OptimizerState,
    TrainConfig,
    TrainingOps,
)
from ..ports.train_contracts import (
    EpochsResult,
    LocalTrainerProtocol,
    OptimizerProtocol,
    StepResult,
    TrainingDivergedError,
)
from ..utils.numerics import row_norms


class LocalTrainer(LocalTrainerProtocol):
    """ローカル学習サービスの実装"""

    def __init__(self, optimizer_factory: Callable[..., OptimizerProtocol]):
        """
        Args:
            optimizer_factory: (lr, weight_decay) からオプティマイザを作る関数
        """
        self.optimizer_factory = optimizer_factory

    def features(self, model: ClientModel, x, cfg: TrainConfig) -> Tuple[np.ndarray, np.ndarray]:
        """(生の埋め込み z, 生徒が使う特徴 ẑ)"""
        z = model.encode(x)
        if cfg.dcr:
            return z, TrainingOps.soft_clip(z, cfg.clip_radius, cfg.gamma)
        return z, z

    def loss_and_grads(
        self,
        model: ClientModel,
        x: np.ndarray,
        labels: np.ndarray,
        global_protos: Optional[PrototypeSet],
        cfg: TrainConfig,
    ) -> Tuple[LossBreakdown, Dict[str, np.ndarray]]:
        """
        損失の内訳と学習対象パラメータの勾配

        教師ヘッドの重みは学習しないが、教師ロジットを通じた
        エンコーダへの勾配は含める
        """
        y = np.asarray(labels, dtype=np.int64)
        batch = y.shape[0]
        h = model.hidden(x)
        z, z_hat = self.features(model, x, cfg)
        if not np.all(np.isfinite(z)):
            raise TrainingDivergedError("non-finite embeddings")

        student_logits = z_hat @ model.classifier_W + model.classifier_b
        teacher_logits = z @ model.teacher_W + model.teacher_b

        ce, proximal = TrainingOps.base_loss(
            z_hat,
            y,
            model.classifier_W,
            model.classifier_b,
            global_protos,
            cfg.lambda_proto,
        )
        kd = TrainingOps.kd_loss(teacher_logits, student_logits, cfg.tau)
        total = ce + proximal + cfg.lambda1 * kd

        if not np.isfinite(total):
            raise TrainingDivergedError(
                f"non-finite loss: ce={ce}, proximal={proximal}, kd={kd}"
            )

        # 生徒ロジットの勾配
        targets, has_proto = TrainingOps.nearest_prototypes(z_hat, y, global_protos)
        grad_student = np.exp(log_softmax(student_logits, axis=1))
        grad_student[np.arange(batch), y] -= 1.0
        grad_student /= batch
        grad_teacher = np.zeros_like(teacher_logits)
        if cfg.lambda1 > 0:
            kd_teacher, kd_student = TrainingOps.kd_grads(
                teacher_logits, student_logits, cfg.tau
            )
            grad_student += cfg.lambda1 * kd_student
            grad_teacher = cfg.lambda1 * kd_teacher

        grad_z_hat = grad_student @ model.classifier_W.T
        if np.any(has_proto):
            n_proto = int(np.sum(has_proto))
            grad_z_hat[has_proto] += (
                2.0 * cfg.lambda_proto * (z_hat[has_proto] - targets[has_proto]) / n_proto
            )
        if cfg.dcr:
            grad_z = TrainingOps.soft_clip_vjp(z, grad_z_hat, cfg.clip_radius, cfg.gamma)
        else:
            grad_z = grad_z_hat
        grad_z = grad_z + grad_teacher @ model.teacher_W.T

        grads = {
            "adapter_W": h.T @ grad_z,
            "adapter_b": grad_z.sum(axis=0),
            "classifier_W": z_hat.T @ grad_student,
            "classifier_b": grad_student.sum(axis=0),
        }
        breakdown = LossBreakdown(
            ce=ce,
            proximal=proximal,
            kd=kd,
            total=total,
            mean_pre_clip_norm=float(np.mean(row_norms(z))),
            logit_gap=float(np.mean(row_norms(teacher_logits - student_logits))),
        )
        return breakdown, grads

    def train_step(
        self,
        model: ClientModel,
        x: np.ndarray,
        labels: np.ndarray,
        global_protos: Optional[PrototypeSet],
        cfg: TrainConfig,
        optimizer_state: OptimizerState,
    ) -> StepResult:
        """
        1ステップ更新

        Raises:
            TrainingDivergedError: 損失が有限でない場合
        """
        breakdown, grads = self.loss_and_grads(model, x, labels, global_protos, cfg)
        optimizer = self.optimizer_factory(lr=cfg.lr, weight_decay=cfg.weight_decay)
        params, state = optimizer.step(model.trainable(), grads, optimizer_state)
        updated = model.with_params(**params)
        teacher = TrainingOps.ema_update(
            updated.teacher(),
            {"W": updated.classifier_W, "b": updated.classifier_b},
            cfg.beta,
        )
        updated = updated.with_params(teacher_W=teacher["W"], teacher_b=teacher["b"])
        return StepResult(model=updated, optimizer_state=state, loss=breakdown)

    def train_epochs(
        self,
        model: ClientModel,
        data: FeatureMatrix,
        global_protos: Optional[PrototypeSet],
        cfg: TrainConfig,
        optimizer_state: OptimizerState,
        rng: np.random.Generator,
    ) -> EpochsResult:
        """E エポックのミニバッチ学習（エポックごとに並びをシャッフル）"""
        history: List[LossBreakdown] = []
        for epoch in range(cfg.epochs):
            order = rng.permutation(data.n)
            losses: List[LossBreakdown] = []
            for start in range(0, data.n, cfg.batch_size):
                index = order[start : start + cfg.batch_size]
                result = self.train_step(
                    model,
                    data.values[index],
                    data.labels[index],
                    global_protos,
                    cfg,
                    optimizer_state,
                )
                model, optimizer_state = result.model, result.optimizer_state
                losses.append(result.loss)
            history.append(LossBreakdown.average(losses))
            logger.debug(
                f"epoch {epoch}: total={history[-1].total:.4f}, "
                f"norm={history[-1].mean_pre_clip_norm:.3f}"
            )
        return EpochsResult(model=model, optimizer_state=optimizer_state, epochs=history)

    def predict(self, model: ClientModel, x: np.ndarray, cfg: TrainConfig) -> np.ndarray:
        _, z_hat = self.features(model, x, cfg)
        return np.argmax(z_hat @ model.classifier_W + model.classifier_b, axis=1)
