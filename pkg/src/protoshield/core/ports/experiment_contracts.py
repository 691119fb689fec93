"""
実験実行・成果物・レポートの契約定義
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Protocol

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..domain.common import ProtoShieldError

SCHEMA_VERSION = 1


# DTOs
class RunResult(BaseModel):
    """1実行分の結果"""

    run_dir: Path
    method: str
    epsilon: float
    seed: int
    summary: Dict[str, Any] = Field(default_factory=dict)


class ScenarioResult(BaseModel):
    """シナリオ全体の結果"""

    root: Path
    kind: str
    runs: List[RunResult] = Field(default_factory=list)
    comparison_path: Optional[Path] = None


class ReportResult(BaseModel):
    """比較表"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    accuracy: pd.DataFrame = Field(..., description="手法・ε ごとの AVG / STD")
    attack: Optional[pd.DataFrame] = Field(default=None, description="攻撃指標 mean ± std")
    long: pd.DataFrame = Field(..., description="プロット用の縦持ち表")
    runs: int = Field(..., ge=1)


class SelfTestCheck(BaseModel):
    """自己診断の1項目"""

    name: str
    passed: bool
    detail: str = ""
    seconds: float = Field(default=0.0, ge=0.0)


# インターフェース（ポート）
class ArtifactRepositoryProtocol(Protocol):
    """実行成果物の保存と読み込み"""

    def run_dir(self, *parts: str) -> Path:
        """成果物ディレクトリを作成して返す"""
        ...

    def write_config(self, run_dir: Path, config: Dict[str, Any]) -> Path: ...

    def write_table(self, run_dir: Path, name: str, rows: List[Dict[str, Any]]) -> Path: ...

    def append_uploads(
        self, run_dir: Path, records: List[Dict[str, float]], reset: bool = False
    ) -> Path:
        """送信ログへ追記（reset なら作り直す）"""
        ...

    def read_uploads(self, run_dir: Path) -> pd.DataFrame: ...

    def write_summary(self, run_dir: Path, summary: Dict[str, Any]) -> Path: ...

    def read_summary(self, run_dir: Path) -> Dict[str, Any]: ...

    def find_runs(self, roots: List[Path]) -> List[Path]:
        """summary.json を持つディレクトリを列挙（昇順）"""
        ...


# エラー定義
class ConfigError(ProtoShieldError):
    """設定エラー（キーのパスを保持）"""

    code: str = "CONFIG_ERROR"

    def __init__(self, message: str, key: str = ""):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class ExperimentError(ProtoShieldError):
    """実験実行時エラー"""

    code: str = "EXPERIMENT_ERROR"


class ReportError(ProtoShieldError):
    """レポート作成の基底エラー"""

    code: str = "REPORT_ERROR"


class SchemaMismatchError(ReportError):
    """成果物のスキーマバージョンが混在している"""

    code: str = "SCHEMA_MISMATCH"
