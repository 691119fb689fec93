"""
アプリケーション初期化

dependency-injectorコンテナとログ設定の初期化を管理
"""

from typing import Optional

from loguru import logger

from . import __version__
from .core.containers import Container, TestContainer
from .core.logging import setup_logging


def create_app(test_mode: bool = False, log_level: Optional[str] = None) -> Container:
    """
    アプリケーションを初期化してDIコンテナを返す

    Args:
        test_mode: テストモードフラグ
        log_level: 設定のログレベルを上書きする場合に指定（CLI の --log-level）

    Returns:
        初期化されたDIコンテナ
    """
    container = TestContainer() if test_mode else Container()

    settings = container.settings()
    log_config = settings.get_log_config()
    setup_logging(
        level=(log_level or log_config["level"]).upper(),
        log_file=log_config["file"],
        format_str=log_config["format"],
        debug=log_config["debug"],
    )
    logger.debug(
        f"protoshield {__version__} initialized: output_root={settings.output_root}, "
        f"test_mode={settings.test_mode}"
    )

    return container
