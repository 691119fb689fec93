"""
ドメインスキューの合成データ

全ドメイン共通のクラス平均を、ドメインごとの直交回転 + 平行移動で写す。
クライアント m はドメイン m のデータだけを持つ。
"""

from typing import List

import numpy as np
from loguru import logger
from scipy.stats import special_ortho_group

from ...core.domain.data_domain import ClientSplit, DomainSpec, FeatureMatrix
from ...core.ports.data_contracts import DatasetGeneratorProtocol, DataGenerationError
from ...core.utils.numerics import RngStream, split_indices


def class_means(
    n_classes: int, input_dim: int, margin: float, rng: np.random.Generator
) -> np.ndarray:
    """
    互いの距離が margin になるクラス平均

    C > input_dim では直交配置できないので乱数配置にする
    """
    if n_classes <= input_dim:
        basis, _ = np.linalg.qr(rng.standard_normal((input_dim, n_classes)))
        return basis.T * (margin / np.sqrt(2.0))
    return rng.standard_normal((n_classes, input_dim)) * margin


def random_rotation(input_dim: int, rng: np.random.Generator) -> np.ndarray:
    if input_dim == 1:
        return np.eye(1)
    return special_ortho_group.rvs(input_dim, random_state=rng)


def sample_domain(spec: DomainSpec, rng: np.random.Generator) -> FeatureMatrix:
    """x = rotation (μ_c + noise) + shift をクラスごとに samples_per_class 個"""
    values, labels = [], []
    for label in range(spec.n_classes):
        noise = rng.standard_normal((spec.samples_per_class, spec.input_dim))
        latent = spec.base_means[label] + spec.noise_scale * noise
        values.append(latent @ spec.rotation.T + spec.shift)
        labels.append(np.full(spec.samples_per_class, label))
    return FeatureMatrix(values=np.concatenate(values), labels=np.concatenate(labels))


def stratified_split(
    data: FeatureMatrix, test_fraction: float, rng: np.random.Generator
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """
    クラスごとに学習/テストへ分割

    各クラス 2 件以上なら両方に 1 件以上、1 件だけのクラスは学習側に入れる。
    テストが空になる場合は学習件数の最も多いクラスから 1 件移す。
    """
    train_index, test_index = [], []
    for label in data.classes:
        rows = np.flatnonzero(data.labels == label)
        if rows.shape[0] == 1:
            train_index.append(rows)
            continue
        test, train = split_indices(rows.shape[0], test_fraction, rng)
        test_index.append(rows[test])
        train_index.append(rows[train])
    if not test_index and data.n >= 2:
        largest = max(range(len(train_index)), key=lambda i: train_index[i].shape[0])
        rows = train_index[largest]
        moved = int(rng.integers(0, rows.shape[0]))
        test_index.append(rows[moved : moved + 1])
        train_index[largest] = np.delete(rows, moved)
    train = np.sort(np.concatenate(train_index))
    test = np.sort(np.concatenate(test_index)) if test_index else np.zeros(0, dtype=np.int64)
    return data.subset(train), data.subset(test)


class DomainSkewGenerator(DatasetGeneratorProtocol):
    """ドメインスキューのクライアント分割を生成"""

    def __init__(
        self,
        n_clients: int = 4,
        n_classes: int = 4,
        input_dim: int = 32,
        samples_per_class: int = 48,
        test_fraction: float = 0.5,
        noise_scale: float = 1.0,
        margin: float = 4.0,
        shift_scale: float = 1.0,
        identity_transforms: bool = False,
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
        self.shift_scale = shift_scale
        self.identity_transforms = identity_transforms

    def domains(self, stream: RngStream) -> List[DomainSpec]:
        """クライアントごとのドメイン定義"""
        rng = stream.child("domains").generator()
        means = class_means(self.n_classes, self.input_dim, self.margin, rng)
        specs = []
        for m in range(self.n_clients):
            if self.identity_transforms:
                rotation, shift = np.eye(self.input_dim), np.zeros(self.input_dim)
            else:
                rotation = random_rotation(self.input_dim, rng)
                shift = rng.standard_normal(self.input_dim) * self.shift_scale
            specs.append(
                DomainSpec(
                    name=f"domain{m}",
                    n_classes=self.n_classes,
                    input_dim=self.input_dim,
                    base_means=means,
                    rotation=rotation,
                    shift=shift,
                    noise_scale=self.noise_scale,
                    samples_per_class=self.samples_per_class,
                )
            )
        closest = specs[0].min_margin() if specs else self.margin
        if closest < self.margin * (1 - 1e-9) or self.margin < self.noise_scale:
            logger.warning(
                f"degenerate class margin: min distance {closest:.3f}, noise {self.noise_scale}"
            )
        return specs

    def generate(self, stream: RngStream) -> List[ClientSplit]:
        splits = []
        for m, spec in enumerate(self.domains(stream)):
            rng = stream.child("client", m).generator()
            data = sample_domain(spec, rng)
            train, test = stratified_split(data, self.test_fraction, rng)
            splits.append(ClientSplit(client_id=m, domain=spec.name, train=train, test=test))
        logger.info(
            f"Generated domain-skew data: {self.n_clients} clients, "
            f"{self.n_classes} classes, {self.samples_per_class} samples/class"
        )
        return splits
