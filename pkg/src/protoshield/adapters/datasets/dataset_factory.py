"""
データ生成器のファクトリークラス
"""

from typing import Dict, Type

from loguru import logger

from ...core.ports.data_contracts import DatasetGeneratorProtocol
from .domain_skew import DomainSkewGenerator
from .label_skew import LabelSkewGenerator


class DatasetFactory:
    """データ生成器のファクトリークラス"""

    _generators: Dict[str, Type[DatasetGeneratorProtocol]] = {
        "domain": DomainSkewGenerator,
        "label": LabelSkewGenerator,
    }

    @classmethod
    def create(cls, skew: str = "domain", **kwargs) -> DatasetGeneratorProtocol:
        """
        データ生成器を作成

        Args:
            skew: 非 IID の種類 ("domain", "label")
            **kwargs: 初期化引数

        Raises:
            ValueError: 不正な種類が指定された場合
        """
        if skew not in cls._generators:
            available = ", ".join(cls._generators.keys())
            raise ValueError(f"Unknown skew: {skew}. Available: {available}")

        logger.info(f"Creating {skew}-skew dataset generator")
        return cls._generators[skew](**kwargs)

    @classmethod
    def get_available_methods(cls) -> list[str]:
        return list(cls._generators.keys())
