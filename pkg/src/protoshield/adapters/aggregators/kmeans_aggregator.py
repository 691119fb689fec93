"""
k-means による複数グローバルプロトタイプの生成
"""

from collections import defaultdict
from typing import Dict, List

import numpy as np
from loguru import logger

from ...core.domain.common import InvalidInputError
from ...core.domain.prototype_domain import SERVER_ID, Prototype, PrototypeSet
from ...core.ports.prototype_contracts import AggregatorProtocol, EmptyUploadError
from ...core.utils.numerics import kmeans


class KMeansAggregator(AggregatorProtocol):
    """クラスごとにアップロードされたプロトタイプを k 個にクラスタリング"""

    def __init__(self, k_global: int = 2, iters: int = 50):
        if k_global < 1:
            raise InvalidInputError(f"k_global must be positive: {k_global}")
        self.k_global = k_global
        self.iters = iters

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
            vectors = np.stack([p.vector for p in members])
            supports = np.array([p.support for p in members])
            k = min(self.k_global, len(members))
            if k < self.k_global:
                logger.warning(
                    f"class {label}: {len(members)} uploaded prototypes < k_global={self.k_global}"
                )
            result = kmeans(vectors, k, self.iters, rng)
            for cluster in range(k):
                assigned = result.assignment == cluster
                if not np.any(assigned):
                    continue
                prototypes.append(
                    Prototype(
                        label=label,
                        cluster=cluster,
                        vector=result.centroids[cluster],
                        support=int(supports[assigned].sum()),
                    )
                )
        return PrototypeSet(client_id=SERVER_ID, round=round, prototypes=prototypes)
