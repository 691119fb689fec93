"""
プロトタイプ公開機構のファクトリークラス
"""

from typing import Dict, Type

from loguru import logger

from ...core.ports.prototype_contracts import PrivatizerProtocol
from .clipping_privatizer import ClipOnlyPrivatizer, IsotropicPrivatizer
from .variance_privatizer import VariancePrivatizer


class PrivatizerFactory:
    """公開機構のファクトリークラス"""

    _privatizers: Dict[str, Type[PrivatizerProtocol]] = {
        "none": ClipOnlyPrivatizer,
        "igpp": IsotropicPrivatizer,
        "vpp": VariancePrivatizer,
    }

    @classmethod
    def create(cls, method: str = "igpp", **kwargs) -> PrivatizerProtocol:
        """
        公開機構を作成

        Args:
            method: 公開機構の種類 ("none", "igpp", "vpp")
            **kwargs: 初期化引数

        Returns:
            PrivatizerProtocol: 公開機構インスタンス

        Raises:
            ValueError: 不正な種類が指定された場合
        """
        if method not in cls._privatizers:
            available_methods = ", ".join(cls._privatizers.keys())
            raise ValueError(
                f"Unknown release mechanism: {method}. Available: {available_methods}"
            )

        privatizer_class = cls._privatizers[method]
        logger.info(f"Creating {method} privatizer")

        return privatizer_class(**kwargs)

    @classmethod
    def get_available_methods(cls) -> list[str]:
        """利用可能な公開機構を取得"""
        return list(cls._privatizers.keys())
