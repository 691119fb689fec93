"""
データ生成機能の契約定義
"""

from pathlib import Path
from typing import List, Protocol

from ..domain.common import InvalidInputError, ProtoShieldError
from ..domain.data_domain import ClientSplit
from ..utils.numerics import RngStream


class DatasetGeneratorProtocol(Protocol):
    """クライアントごとの学習/テスト分割を生成する"""

    def generate(self, stream: RngStream) -> List[ClientSplit]:
        """
        分割を生成

        事前条件:
        - クラス数 ≥ 2

        事後条件:
        - クライアントごとに学習/テストが互いに素
        - 同じ stream からは同じ分割が得られる

        例外:
        - DataGenerationError: データが小さすぎるなど生成できない場合
        """
        ...


class DatasetArchiveProtocol(Protocol):
    """生成済み分割の保存と読込"""

    def save(self, path: Path, splits: List[ClientSplit]) -> Path:
        """保存先のパスを返す"""
        ...

    def load(self, path: Path) -> List[ClientSplit]:
        """
        例外:
        - DataGenerationError: ファイルが無い、または形式が異なる場合
        """
        ...


class DataGenerationError(ProtoShieldError):
    """データ生成の基底エラー"""

    code: str = "DATA_GENERATION_ERROR"


class PoolTooSmallError(DataGenerationError, InvalidInputError):
    """サンプルプールがクライアント数に対して小さすぎる"""

    code: str = "POOL_TOO_SMALL"
