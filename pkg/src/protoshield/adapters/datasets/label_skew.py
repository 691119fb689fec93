"""
ラベルスキューの合成データ

単一ドメインのサンプルプールを、クラスごとに Dirichlet(α) の割合で
クライアントへ配る。α が小さいほど偏る。
"""

from typing import List

import numpy as np
from loguru import logger

from ...core.domain.data_domain import ClientSplit, DomainSpec, FeatureMatrix
from ...core.ports.data_contracts import (
    DatasetGeneratorProtocol,
    DataGenerationError,
    PoolTooSmallError,
)
from ...core.utils.numerics import RngStream
from .domain_skew import class_means, sample_domain, stratified_split


def dirichlet_partition(
    labels: np.ndarray,
    n_clients: int,
    alpha: float,
    rng: np.random.Generator,
    min_samples: int = 2,
    max_redraws: int = 50,
) -> List[np.ndarray]:
    """
    ラベル列の添字をクライアントへ配分

    各クライアントが min_samples 件以上になるまで引き直し、
    max_redraws 回で満たせなければ最大のクライアントから移して補う。

    Raises:
        PoolTooSmallError: プールが n_clients·min_samples 未満の場合
    """
    labels = np.asarray(labels)
    if labels.shape[0] < n_clients * min_samples:
        raise PoolTooSmallError(
            f"pool of {labels.shape[0]} cannot give {n_clients} clients "
            f"{min_samples} samples each"
        )
    if alpha <= 0:
        raise DataGenerationError(f"alpha must be positive: {alpha}")

    parts: List[List[int]] = []
    for attempt in range(max_redraws):
        parts = [[] for _ in range(n_clients)]
        for label in np.unique(labels):
            rows = rng.permutation(np.flatnonzero(labels == label))
            proportions = rng.dirichlet(np.full(n_clients, alpha))
            cuts = (np.cumsum(proportions) * rows.shape[0]).astype(int)[:-1]
            for client, chunk in enumerate(np.split(rows, cuts)):
                parts[client].extend(chunk.tolist())
        if min(len(p) for p in parts) >= min_samples:
            logger.debug(f"Dirichlet partition accepted after {attempt + 1} draws")
            return [np.sort(np.asarray(p, dtype=np.int64)) for p in parts]

    logger.warning(
        f"Dirichlet partition kept leaving clients below {min_samples} samples; "
        f"repairing after {max_redraws} draws"
    )
    while True:
        sizes = [len(p) for p in parts]
        needy = int(np.argmin(sizes))
        if sizes[needy] >= min_samples:
            break
        donor = int(np.argmax(sizes))
        moved = parts[donor].pop(int(rng.integers(0, sizes[donor])))
        parts[needy].append(moved)
    return [np.sort(np.asarray(p, dtype=np.int64)) for p in parts]


class LabelSkewGenerator(DatasetGeneratorProtocol):
    """ラベルスキューのクライアント分割を生成"""

    def __init__(
        self,
        n_clients: int = 4,
        n_classes: int = 4,
        input_dim: int = 32,
        samples_per_class: int = 48,
        test_fraction: float = 0.5,
        noise_scale: float = 1.0,
        margin: float = 4.0,
        alpha: float = 0.5,
        min_samples: int = 2,
    ):
        if n_classes < 2:
            raise DataGenerationError(f"need at least 2 classes: {n_classes}")
        self.n_clients = n_clients
        self.n_classes = n_classes
        self.input_dim = input_dim
        self.samples_per_class = samples_per_class
        self.test_fraction = test_fraction
        self.noise_scale = noise_scale
        self.margin = margin
        self.alpha = alpha
        self.min_samples = min_samples

    def pool(self, stream: RngStream) -> FeatureMatrix:
        """全クライアントで共有するサンプルプール（恒等変換の単一ドメイン）"""
        rng = stream.child("pool").generator()
        spec = DomainSpec(
            name="pool",
            n_classes=self.n_classes,
            input_dim=self.input_dim,
            base_means=class_means(self.n_classes, self.input_dim, self.margin, rng),
            rotation=np.eye(self.input_dim),
            shift=np.zeros(self.input_dim),
            noise_scale=self.noise_scale,
            samples_per_class=self.samples_per_class,
        )
        return sample_domain(spec, rng)

    def generate(self, stream: RngStream) -> List[ClientSplit]:
        data = self.pool(stream)
        rng = stream.child("partition").generator()
        parts = dirichlet_partition(
            data.labels, self.n_clients, self.alpha, rng, self.min_samples
        )
        splits = []
        for m, index in enumerate(parts):
            client = data.subset(index)
            train, test = stratified_split(client, self.test_fraction, rng)
            splits.append(ClientSplit(client_id=m, domain="pool", train=train, test=test))
            logger.debug(f"client {m}: class counts {client.class_counts()}")
        logger.info(
            f"Generated label-skew data: {self.n_clients} clients, alpha={self.alpha}"
        )
        return splits
