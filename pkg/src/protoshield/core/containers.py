"""
dependency-injectorベースのDIコンテナ
"""

from dependency_injector import containers, providers

from ..adapters.aggregators.aggregator_factory import AggregatorFactory
from ..adapters.attacks.attack_factory import AttackFactory
from ..adapters.datasets.dataset_archive import NpzDatasetArchive
from ..adapters.datasets.dataset_factory import DatasetFactory
from ..adapters.optim.adamw import AdamW
from ..adapters.privatizers.privatizer_factory import PrivatizerFactory
from ..adapters.storage.file_repository import FileRepository
from ..config.settings import Settings
from .use_cases.experiment_service import ExperimentService
from .use_cases.report_service import ReportService
from .use_cases.selftest_service import SelfTestService
from .use_cases.train_service import LocalTrainer


class Container(containers.DeclarativeContainer):
    """アプリケーションのDIコンテナ"""

    config = providers.Configuration()

    settings = providers.Singleton(Settings)

    # リポジトリ層
    artifact_repository = providers.Factory(
        FileRepository,
        root=settings.provided.output_root,
    )
    dataset_archive = providers.Factory(NpzDatasetArchive)

    # 学習
    local_trainer = providers.Factory(
        LocalTrainer,
        optimizer_factory=providers.Object(AdamW),
    )

    # アプリケーションサービス層
    experiment_service = providers.Factory(
        ExperimentService,
        repository=artifact_repository,
        trainer=local_trainer,
        dataset_factory=providers.Object(DatasetFactory.create),
        dataset_archive=dataset_archive,
        privatizer_factory=providers.Object(PrivatizerFactory.create),
        aggregator_factory=providers.Object(AggregatorFactory.for_k),
        attack_factory=providers.Object(AttackFactory.create),
    )

    report_service = providers.Factory(
        ReportService,
        repository=artifact_repository,
    )

    selftest_service = providers.Factory(
        SelfTestService,
        trainer=local_trainer,
    )


class TestContainer(Container):
    """テスト用のDIコンテナ"""

    settings = providers.Singleton(
        Settings,
        test_mode=True,
        log_level="DEBUG",
        output_root="/tmp/protoshield_test_runs",
    )

    # 自己診断はモンテカルロ回数を減らす
    selftest_service = providers.Factory(
        SelfTestService,
        trainer=Container.local_trainer,
        laplace_trials=200_000,
        gradient_configs=10,
        selection_seeds=100,
    )
