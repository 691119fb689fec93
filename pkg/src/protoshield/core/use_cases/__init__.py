"""
Use cases層の初期化
"""

from .attack_service import AttackService
from .experiment_service import ExperimentService
from .federation_service import FederationService
from .report_service import ReportService
from .scoring_service import ScoringService
from .selftest_service import SelfTestService
from .train_service import LocalTrainer

__all__ = [
    "AttackService",
    "ExperimentService",
    "FederationService",
    "LocalTrainer",
    "ReportService",
    "ScoringService",
    "SelfTestService",
]
