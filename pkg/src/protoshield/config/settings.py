"""
アプリケーション設定管理

pydantic-settingsを使用した環境変数対応の設定システム
"""

from pathlib import Path
from typing import Any, Dict, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """アプリケーション設定"""

    # 成果物の出力先（PROTOSHIELD_OUTPUT_ROOT）
    output_root: Path = Path("runs")

    # ログ設定
    log_level: str = "INFO"
    log_file: Optional[Path] = None
    log_format: str = (
        "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{line}</cyan> - "
        "<level>{message}</level>"
    )

    # 開発・テスト設定
    debug: bool = False
    test_mode: bool = False

    model_config = SettingsConfigDict(
        env_prefix="PROTOSHIELD_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    def model_post_init(self, __context) -> None:
        """設定後の初期化処理"""
        if not self.test_mode:  # テストモードでは自動作成しない
            self.output_root.mkdir(parents=True, exist_ok=True)

    @property
    def is_development(self) -> bool:
        return self.debug or self.test_mode

    def get_output_path(self, subdirectory: str = "") -> Path:
        """出力パスを取得"""
        if subdirectory:
            return self.output_root / subdirectory
        return self.output_root

    def get_log_config(self) -> Dict[str, Any]:
        """ログ設定を取得"""
        return {
            "level": self.log_level,
            "file": self.log_file,
            "format": self.log_format,
            "debug": self.debug,
        }
