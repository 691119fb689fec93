"""
攻撃のファクトリークラス
"""

from typing import Dict, Type

from loguru import logger

from .fsh_inversion import FSHInversion
from .prototype_mia import PrototypeMIA


class AttackFactory:
    """攻撃のファクトリークラス"""

    _attacks: Dict[str, Type] = {
        "mia": PrototypeMIA,
        "fsh": FSHInversion,
    }

    @classmethod
    def create(cls, method: str, **kwargs):
        """
        攻撃を作成

        Args:
            method: 攻撃の種類 ("mia", "fsh")
            **kwargs: 初期化引数

        Raises:
            ValueError: 不正な種類が指定された場合
        """
        if method not in cls._attacks:
            available_methods = ", ".join(cls._attacks.keys())
            raise ValueError(
                f"Unknown attack: {method}. Available: {available_methods}"
            )

        logger.info(f"Creating {method} attack")
        return cls._attacks[method](**kwargs)

    @classmethod
    def get_available_methods(cls) -> list[str]:
        return list(cls._attacks.keys())
