"""
設定 → 連合学習 → 成果物 → レポートの統合テスト

ファイルシステム上のリポジトリを使って、実行ディレクトリの中身と
アップロードログの形式を確かめる
"""

import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import pandas as pd
import pytest

from protoshield.adapters.aggregators import AggregatorFactory
from protoshield.adapters.attacks import AttackFactory
from protoshield.adapters.datasets import DatasetFactory, NpzDatasetArchive
from protoshield.adapters.optim import AdamW
from protoshield.adapters.privatizers import PrivatizerFactory
from protoshield.adapters.storage import FileRepository
from protoshield.config.run_config import load_config
from protoshield.core.domain.prototype_domain import RECORD_FIELDS
from protoshield.core.use_cases.experiment_service import ExperimentService
from protoshield.core.use_cases.report_service import ReportService
from protoshield.core.use_cases.train_service import LocalTrainer

TINY = [
    "data.n_clients=3",
    "data.n_classes=3",
    "data.input_dim=6",
    "data.hidden_dim=8",
    "data.embed_dim=5",
    "data.samples_per_class=12",
    "privacy.rounds=2",
    "privacy.rho=0.4",
    "train.epochs=1",
    "attack.fsh_steps=20",
    "attack.fsh_patience=10",
    "attack.fsh_batch=2",
]


@pytest.fixture
def repository(tmp_path):
    return FileRepository(root=tmp_path)


@pytest.fixture
def service(repository):
    return ExperimentService(
        repository=repository,
        trainer=LocalTrainer(AdamW),
        dataset_factory=DatasetFactory.create,
        dataset_archive=NpzDatasetArchive(),
        privatizer_factory=PrivatizerFactory.create,
        aggregator_factory=AggregatorFactory.for_k,
        attack_factory=AttackFactory.create,
    )


def test_run_directory_layout(service, tmp_path):
    """1回の実行で決められた成果物がそろうこと"""
    config = load_config(overrides=[*TINY, "scenario.kind=train_attack", "scenario.dump_scores=true"])
    result = service.run(config, tmp_path / "train_attack")

    run_dir = result.runs[0].run_dir
    assert run_dir.name == "vpdr_eps1_seed0"
    for name in (
        "config.toml",
        "metrics.csv",
        "training.csv",
        "uploads.log",
        "attack.csv",
        "scores.csv",
        "summary.json",
        "run.log",
    ):
        assert (run_dir / name).exists(), name
    assert (tmp_path / "train_attack" / "comparison.csv").exists()

    run_log = (run_dir / "run.log").read_text()
    assert "Run vpdr_eps1_seed0: train_attack" in run_log

    snapshot = tomllib.loads((run_dir / "config.toml").read_text())
    assert snapshot["privacy"]["mechanism"] == "vpdr"
    assert snapshot["attack"]["enabled"] is True

    metrics = pd.read_csv(run_dir / "metrics.csv")
    assert sorted(metrics["round"].unique()) == [0, 1]
    assert metrics["d_A"].dropna().eq(2).all()


def test_uploads_contain_only_prototypes(service, tmp_path):
    """送信ログは (固定フィールド + 埋め込み次元) の列だけを持つこと"""
    config = load_config(overrides=[*TINY, "privacy.mechanism=igpp"])
    result = service.run(config, tmp_path / "train")

    uploads = pd.read_csv(result.runs[0].run_dir / "uploads.log")
    assert list(uploads.columns) == [*RECORD_FIELDS, *(f"v{j}" for j in range(5))]
    # 2 ラウンド × 3 クライアント × 3 クラス
    assert len(uploads) == 18
    assert uploads["support"].min() >= 1


def test_summary_is_byte_identical(service, tmp_path):
    """同じ設定・シードの実行は同じ summary.json を書くこと"""
    config = load_config(overrides=TINY)
    first = service.run(config, tmp_path / "first").runs[0].run_dir
    second = service.run(config, tmp_path / "second").runs[0].run_dir
    assert (first / "summary.json").read_bytes() == (second / "summary.json").read_bytes()


def test_sweep_and_report(service, repository, tmp_path):
    """スイープの成果物からレポートを作れること"""
    config = load_config(
        overrides=[
            *TINY,
            "scenario.kind=sweep",
            'scenario.methods=["none", "igpp", "vpdr"]',
            "scenario.epsilons=[1.0]",
            "scenario.seeds=[0, 1]",
        ]
    )
    result = service.run(config, tmp_path / "sweep")
    assert len(result.runs) == 6

    comparison = pd.read_csv(result.comparison_path)
    assert len(comparison) == 6
    assert set(comparison["method"]) == {"none", "igpp", "vpdr"}

    report = ReportService(repository).build([result.root])
    table = report.accuracy.set_index("method")
    assert report.runs == 6
    assert (table["runs"] == 2).all()
    assert table.loc["igpp", "delta_vs_igpp"] == 0.0

    summary = json.loads((result.runs[0].run_dir / "summary.json").read_text())
    assert summary["budget"]["epsilon"] == 1.0
