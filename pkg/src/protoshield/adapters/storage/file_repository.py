"""
ファイルシステム上の成果物リポジトリ

1実行 = 1ディレクトリ:
    config.toml, metrics.csv, training.csv, uploads.log, attack.csv,
    scores.csv, summary.json, run.log
"""

import json
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd
import tomli_w
from loguru import logger

from ...core.ports.experiment_contracts import (
    ArtifactRepositoryProtocol,
    ExperimentError,
    ReportError,
)

CONFIG_FILE = "config.toml"
SUMMARY_FILE = "summary.json"
UPLOADS_FILE = "uploads.log"


class FileRepository(ArtifactRepositoryProtocol):
    """ディレクトリ単位で成果物を読み書きするリポジトリ"""

    def __init__(self, root: Path = Path("runs")):
        """
        Args:
            root: 成果物のルート（PROTOSHIELD_OUTPUT_ROOT）
        """
        self.root = Path(root)

    def run_dir(self, *parts: str) -> Path:
        path = self.root.joinpath(*parts)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def write_config(self, run_dir: Path, config: Dict[str, Any]) -> Path:
        path = Path(run_dir) / CONFIG_FILE
        path.write_text(tomli_w.dumps(config), encoding="utf-8")
        logger.debug(f"Wrote config snapshot to {path}")
        return path

    def write_table(self, run_dir: Path, name: str, rows: List[Dict[str, Any]]) -> Path:
        """行の辞書リストを CSV に書く（空なら見出しもない空ファイル）"""
        path = Path(run_dir) / name
        frame = pd.DataFrame(rows)
        frame.to_csv(path, index=False, lineterminator="\n")
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return path

    def append_uploads(
        self, run_dir: Path, records: List[Dict[str, float]], reset: bool = False
    ) -> Path:
        """送信されたプロトタイプのレコードを追記（初回のみ見出し行）"""
        path = Path(run_dir) / UPLOADS_FILE
        if reset:
            path.unlink(missing_ok=True)
        if not records:
            path.touch()
            return path
        frame = pd.DataFrame(records)
        header = not path.exists() or path.stat().st_size == 0
        frame.to_csv(path, mode="a", header=header, index=False, lineterminator="\n")
        return path

    def read_uploads(self, run_dir: Path) -> pd.DataFrame:
        """
        送信ログを読込

        Raises:
            ExperimentError: ログがない場合
        """
        path = Path(run_dir) / UPLOADS_FILE
        if not path.exists():
            raise ExperimentError(f"upload log not found: {path}")
        if path.stat().st_size == 0:
            return pd.DataFrame()
        return pd.read_csv(path)

    def write_summary(self, run_dir: Path, summary: Dict[str, Any]) -> Path:
        """キー順を固定した JSON（同じ内容なら同じバイト列）"""
        path = Path(run_dir) / SUMMARY_FILE
        text = json.dumps(summary, sort_keys=True, indent=2, ensure_ascii=False)
        path.write_text(text + "\n", encoding="utf-8")
        logger.info(f"Wrote summary to {path}")
        return path

    def read_summary(self, run_dir: Path) -> Dict[str, Any]:
        """
        Raises:
            ReportError: summary.json がない、または壊れている場合
        """
        path = Path(run_dir) / SUMMARY_FILE
        if not path.exists():
            raise ReportError(f"summary.json not found in {run_dir}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise ReportError(f"Invalid JSON in {path}: {e}") from e

    def find_runs(self, roots: List[Path]) -> List[Path]:
        found = set()
        for root in roots:
            root = Path(root)
            if not root.exists():
                logger.warning(f"Artifact directory does not exist: {root}")
                continue
            if (root / SUMMARY_FILE).exists():
                found.add(root)
            for path in root.rglob(SUMMARY_FILE):
                found.add(path.parent)
        logger.info(f"Found {len(found)} run directories")
        return sorted(found)
