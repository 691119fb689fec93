"""
ドメイン共通のエラー定義

各機能のエラー階層はこの基底クラスから派生する
"""


class ProtoShieldError(Exception):
    """protoshield の基底エラー"""

    code: str = "PROTOSHIELD_ERROR"


class InvalidInputError(ProtoShieldError, ValueError):
    """事前条件違反（不正な入力）"""

    code: str = "INVALID_INPUT"


class InternalError(ProtoShieldError):
    """内部エラー（正しい入力で起きてはならない状態）"""

    code: str = "INTERNAL_ERROR"
