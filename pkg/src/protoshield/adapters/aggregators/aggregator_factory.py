"""
グローバルプロトタイプ生成のファクトリークラス
"""

from typing import Dict, Type

from loguru import logger

from ...core.ports.prototype_contracts import AggregatorProtocol
from .kmeans_aggregator import KMeansAggregator
from .mean_aggregator import MeanAggregator


class AggregatorFactory:
    """集約方式のファクトリークラス"""

    _aggregators: Dict[str, Type[AggregatorProtocol]] = {
        "mean": MeanAggregator,
        "kmeans": KMeansAggregator,
    }

    @classmethod
    def create(cls, method: str = "mean", **kwargs) -> AggregatorProtocol:
        """
        集約方式を作成

        Args:
            method: 集約方式の種類 ("mean", "kmeans")
            **kwargs: 初期化引数

        Returns:
            AggregatorProtocol: 集約方式インスタンス

        Raises:
            ValueError: 不正な種類が指定された場合
        """
        if method not in cls._aggregators:
            available_methods = ", ".join(cls._aggregators.keys())
            raise ValueError(
                f"Unknown aggregator method: {method}. Available: {available_methods}"
            )

        aggregator_class = cls._aggregators[method]
        logger.info(f"Creating {method} aggregator")

        return aggregator_class(**kwargs)

    @classmethod
    def for_k(cls, k_global: int) -> AggregatorProtocol:
        """k_global=1 なら平均、それ以外は k-means"""
        if k_global == 1:
            return cls.create("mean")
        return cls.create("kmeans", k_global=k_global)

    @classmethod
    def get_available_methods(cls) -> list[str]:
        """利用可能な集約方式を取得"""
        return list(cls._aggregators.keys())
