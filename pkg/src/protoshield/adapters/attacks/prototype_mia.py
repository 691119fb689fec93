"""
プロトタイプ距離によるメンバーシップ推論

スコア s(x) = −min_p ‖φ(x) − p‖²（公開プロトタイプに近いほどメンバーらしい）
"""

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import precision_recall_curve, roc_curve

from ...core.domain.attack_domain import MIAMetrics
from ...core.domain.common import InvalidInputError
from ...core.ports.attack_contracts import MembershipAttackProtocol
from ...core.utils.numerics import as_matrix, pairwise_sq_distances

MAX_FPR = 0.01


class PrototypeMIA(MembershipAttackProtocol):
    """距離しきい値によるメンバーシップ推論"""

    def __init__(self, max_fpr: float = MAX_FPR):
        self.max_fpr = max_fpr

    def scores(self, features: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
        x = as_matrix(features, "features")
        protos = as_matrix(prototypes, "prototypes")
        if x.shape[1] != protos.shape[1]:
            raise InvalidInputError(
                f"dimension mismatch: features {x.shape[1]} vs prototypes {protos.shape[1]}"
            )
        return -np.min(pairwise_sq_distances(x, protos), axis=1)

    @staticmethod
    def rank_auc(member_scores, nonmember_scores) -> float:
        """Mann-Whitney 統計による AUC（同順位は 1/2）"""
        members = np.asarray(member_scores, dtype=np.float64)
        nonmembers = np.asarray(nonmember_scores, dtype=np.float64)
        ranks = rankdata(np.concatenate([members, nonmembers]))
        n1, n0 = members.shape[0], nonmembers.shape[0]
        u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
        return float(u / (n1 * n0))

    def metrics(self, member_scores, nonmember_scores) -> MIAMetrics:
        members = np.asarray(member_scores, dtype=np.float64).reshape(-1)
        nonmembers = np.asarray(nonmember_scores, dtype=np.float64).reshape(-1)
        if members.size == 0 or nonmembers.size == 0:
            raise InvalidInputError("member and non-member scores must be non-empty")

        y = np.concatenate([np.ones(members.size), np.zeros(nonmembers.size)])
        s = np.concatenate([members, nonmembers])

        fpr, tpr, _ = roc_curve(y, s, drop_intermediate=False)
        tpr_at_fpr = float(np.max(tpr[fpr <= self.max_fpr]))

        # 最後の点（recall=0）はしきい値を持たない
        precision, recall, thresholds = precision_recall_curve(y, s)
        precision, recall = precision[:-1], recall[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            f1 = np.where(
                precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0
            )
        best = int(np.argmax(f1))
        threshold = thresholds[best]
        advantage = float(np.mean(members >= threshold) - np.mean(nonmembers >= threshold))

        return MIAMetrics(
            roc_auc=self.rank_auc(members, nonmembers),
            tpr_at_1pct_fpr=tpr_at_fpr,
            advantage=advantage,
            f1=float(f1[best]),
        )
