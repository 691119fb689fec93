"""
攻撃評価のドメインモデル
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

MIA_FIELDS = ("roc_auc", "tpr_at_1pct_fpr", "advantage", "f1")
FSH_FIELDS = ("cosine_similarity", "cffd", "top1_hit_pct")


class MIAMetrics(BaseModel):
    """メンバーシップ推論の指標"""

    model_config = ConfigDict(frozen=True)

    roc_auc: float = Field(..., ge=0.0, le=1.0)
    tpr_at_1pct_fpr: float = Field(..., ge=0.0, le=1.0)
    advantage: float = Field(..., ge=-1.0, le=1.0)
    f1: float = Field(..., ge=0.0, le=1.0)


class FSHMetrics(BaseModel):
    """特徴空間ハイジャック（再構成）の指標"""

    model_config = ConfigDict(frozen=True)

    cosine_similarity: float = Field(..., ge=-1.0, le=1.0)
    cffd: float = Field(..., ge=0.0)
    top1_hit_pct: float = Field(..., ge=0.0, le=100.0)


class AttackRecord(BaseModel):
    """(ラウンド, クライアント) ごとの攻撃結果"""

    model_config = ConfigDict(frozen=True)

    round: int = Field(..., ge=0)
    client_id: int = Field(..., ge=0)
    method: str
    epsilon: float
    mia: Optional[MIAMetrics] = None
    fsh: Optional[FSHMetrics] = None

    def flat(self) -> Dict[str, object]:
        row: Dict[str, object] = {
            "round": self.round,
            "client_id": self.client_id,
            "method": self.method,
            "epsilon": self.epsilon,
        }
        for name in MIA_FIELDS:
            row[name] = getattr(self.mia, name) if self.mia else None
        for name in FSH_FIELDS:
            row[name] = getattr(self.fsh, name) if self.fsh else None
        return row


class AttackReport(BaseModel):
    """攻撃結果の集約（ラウンド・クライアント全体の平均 ± 標準偏差）"""

    model_config = ConfigDict(frozen=True)

    records: List[AttackRecord] = Field(default_factory=list)

    def summary(self) -> Dict[str, Tuple[float, float]]:
        """指標名 → (mean, std)。値のない指標は含めない"""
        result: Dict[str, Tuple[float, float]] = {}
        for name in MIA_FIELDS:
            values = [getattr(r.mia, name) for r in self.records if r.mia is not None]
            if values:
                result[name] = (float(np.mean(values)), float(np.std(values)))
        for name in FSH_FIELDS:
            values = [getattr(r.fsh, name) for r in self.records if r.fsh is not None]
            if values:
                result[name] = (float(np.mean(values)), float(np.std(values)))
        return result
