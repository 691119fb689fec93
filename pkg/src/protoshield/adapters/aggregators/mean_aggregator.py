"""
支持数重み付き平均によるグローバルプロトタイプ生成
"""

from collections import defaultdict
from typing import Dict, List

import numpy as np

from ...core.domain.prototype_domain import SERVER_ID, Prototype, PrototypeSet
from ...core.ports.prototype_contracts import AggregatorProtocol, EmptyUploadError


class MeanAggregator(AggregatorProtocol):
    """クラスごとに全アップロードの支持数重み付き平均を取る"""

    def aggregate(
        self, uploads: List[PrototypeSet], round: int, rng: np.random.Generator
    ) -> PrototypeSet:
        if not uploads:
            raise EmptyUploadError("no uploads to aggregate")
        grouped: Dict[int, List[Prototype]] = defaultdict(list)
        for upload in uploads:
            for p in upload.prototypes:
                grouped[p.label].append(p)

        prototypes = []
        for label in sorted(grouped):
            members = grouped[label]
            weights = np.array([p.support for p in members], dtype=np.float64)
            vectors = np.stack([p.vector for p in members])
            prototypes.append(
                Prototype(
                    label=label,
                    vector=weights @ vectors / weights.sum(),
                    support=int(weights.sum()),
                )
            )
        return PrototypeSet(client_id=SERVER_ID, round=round, prototypes=prototypes)
