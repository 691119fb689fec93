"""
実験実行サービスの実装

設定からシナリオ（単発・アブレーション・スイープなど）を展開し、
実行ごとに成果物ディレクトリを作って連合学習と攻撃評価を回す
"""

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from ...config.run_config import HYPER_KEYS, RunConfig
from ..domain.attack_domain import AttackRecord, AttackReport
from ..domain.common import ProtoShieldError
from ..domain.data_domain import ClientSplit, FeatureMatrix
from ..domain.federation_domain import GlobalState
from ..domain.privacy_domain import (
    Method,
    PrivacyAccountant,
    PrivacyBudget,
    ReleaseMechanism,
)
from ..domain.train_domain import ClientModel, ClientState
from ..logging import add_run_sink
from ..ports.attack_contracts import AttackServiceProtocol
from ..ports.data_contracts import DatasetArchiveProtocol, DatasetGeneratorProtocol
from ..ports.experiment_contracts import (
    SCHEMA_VERSION,
    ArtifactRepositoryProtocol,
    ExperimentError,
    RunResult,
    ScenarioResult,
)
from ..ports.federation_contracts import RoundResult
from ..ports.prototype_contracts import AggregatorProtocol, PrivatizerProtocol
from ..ports.train_contracts import LocalTrainerProtocol
from ..utils.numerics import RngStream
from .attack_service import AttackService
from .federation_service import FederationService
from .scoring_service import ScoringService

ABLATION_METHODS = [Method.IGPP, Method.IGPP_DCR, Method.VPP, Method.VPDR]

Setting = Optional[Tuple[str, float]]


def random_backbone(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> np.ndarray:
    """
    固定バックボーン（input_dim×hidden_dim の直交射影）

    hidden_dim ≥ input_dim なら行が、そうでなければ列が正規直交
    """
    tall, wide = max(input_dim, hidden_dim), min(input_dim, hidden_dim)
    basis, _ = np.linalg.qr(rng.standard_normal((tall, wide)))
    return basis if input_dim >= hidden_dim else basis.T


def run_name(config: RunConfig, setting: Setting = None) -> str:
    name = f"{config.privacy.mechanism.value}_eps{config.privacy.epsilon:g}"
    if setting is not None:
        name += f"_{setting[0]}{setting[1]:g}"
    return f"{name}_seed{config.seed}"


class ExperimentService:
    """実験実行サービスの実装"""

    def __init__(
        self,
        repository: ArtifactRepositoryProtocol,
        trainer: LocalTrainerProtocol,
        dataset_factory: Callable[..., DatasetGeneratorProtocol],
        dataset_archive: DatasetArchiveProtocol,
        privatizer_factory: Callable[..., PrivatizerProtocol],
        aggregator_factory: Callable[[int], AggregatorProtocol],
        attack_factory: Callable[..., Any],
    ):
        """
        Args:
            repository: 成果物リポジトリ
            trainer: ローカル学習サービス
            dataset_factory: (skew, **kwargs) からデータ生成器を作る関数
            dataset_archive: 分割の保存/読込
            privatizer_factory: (method, **kwargs) から公開機構を作る関数
            aggregator_factory: k_global から集約方式を作る関数
            attack_factory: (method, **kwargs) から攻撃を作る関数
        """
        self.repository = repository
        self.trainer = trainer
        self.dataset_factory = dataset_factory
        self.dataset_archive = dataset_archive
        self.privatizer_factory = privatizer_factory
        self.aggregator_factory = aggregator_factory
        self.attack_factory = attack_factory

    # シナリオ展開

    def plan(self, config: RunConfig) -> List[Tuple[RunConfig, Setting]]:
        """
        シナリオを (実行設定, 可変パラメータ) の列に展開

        Raises:
            ConfigError: 展開した設定が検証に通らない場合
        """
        scenario = config.scenario
        seeds = scenario.seeds or [config.seed]
        variants: List[Tuple[Dict[str, Any], Setting]] = []

        if scenario.kind in ("train", "train_attack"):
            updates: Dict[str, Any] = {}
            if scenario.kind == "train_attack":
                updates["attack.enabled"] = True
            variants.append((updates, None))
        elif scenario.kind == "ablation":
            variants.extend(
                ({"privacy.mechanism": m.value}, None) for m in ABLATION_METHODS
            )
        elif scenario.kind == "sweep":
            variants.extend(
                ({"privacy.mechanism": m.value, "privacy.epsilon": eps}, None)
                for m in scenario.methods
                for eps in scenario.epsilons
            )
        elif scenario.kind == "label_skew":
            variants.extend(
                (
                    {"privacy.mechanism": m.value, "data.skew": "label", "data.alpha": a},
                    ("alpha", a),
                )
                for m in scenario.methods
                for a in scenario.alphas
            )
        elif scenario.kind == "hyper":
            variants.extend(
                ({f"{HYPER_KEYS[key]}.{key}": value}, (key, value))
                for key, values in sorted(scenario.hyper.items())
                for value in values
            )

        plans = []
        for updates, setting in variants:
            for seed in seeds:
                plans.append((config.with_updates({**updates, "seed": seed}), setting))
        return plans

    def run(self, config: RunConfig, root: Path) -> ScenarioResult:
        """
        シナリオを実行して comparison.csv を書く

        Raises:
            ConfigError: 設定が不正な場合
            ProtoShieldError: 実行時エラー（ラウンド・クライアントの文脈つき）
        """
        plans = self.plan(config)
        logger.info(f"Starting {config.scenario.kind} scenario with {len(plans)} runs")
        scenario_root = self.repository.run_dir(str(root))
        runs = []
        for run_config, setting in plans:
            run_dir = self.repository.run_dir(str(root), run_name(run_config, setting))
            runs.append(self.run_single(run_config, run_dir, setting))

        comparison = self.repository.write_table(
            scenario_root, "comparison.csv", [self.comparison_row(r) for r in runs]
        )
        logger.info(f"Scenario finished: {len(runs)} runs, comparison at {comparison}")
        return ScenarioResult(
            root=scenario_root, kind=config.scenario.kind, runs=runs, comparison_path=comparison
        )

    @staticmethod
    def comparison_row(run: RunResult) -> Dict[str, Any]:
        summary = run.summary
        setting = summary.get("setting") or {}
        row: Dict[str, Any] = {
            "run": run.run_dir.name,
            "method": run.method,
            "epsilon": run.epsilon,
            "seed": run.seed,
            "setting": setting.get("name", ""),
            "value": setting.get("value"),
            "accuracy_mean": summary["accuracy"]["mean"],
            "accuracy_std": summary["accuracy"]["std"],
        }
        for metric, stats in sorted(summary.get("attack", {}).items()):
            row[metric] = stats["mean"]
        return row

    # 1回分の実行

    def load_splits(self, config: RunConfig) -> List[ClientSplit]:
        data = config.data
        if data.load_path:
            return self.dataset_archive.load(Path(data.load_path))
        common = dict(
            n_clients=data.n_clients,
            n_classes=data.n_classes,
            input_dim=data.input_dim,
            samples_per_class=data.samples_per_class,
            test_fraction=data.test_fraction,
            noise_scale=data.noise_scale,
            margin=data.margin,
        )
        if data.skew == "domain":
            generator = self.dataset_factory(
                "domain",
                **common,
                shift_scale=data.shift_scale,
                identity_transforms=data.identity_transforms,
            )
        else:
            generator = self.dataset_factory("label", **common, alpha=data.alpha)
        splits = generator.generate(RngStream.derive(config.seed, "data"))
        if data.dump_path:
            self.dataset_archive.save(Path(data.dump_path), splits)
        return splits

    def init_clients(self, config: RunConfig, splits: List[ClientSplit]) -> List[ClientState]:
        """全クライアントで同じ固定バックボーンを共有する"""
        input_dim = splits[0].train.dim
        backbone = random_backbone(
            input_dim,
            config.data.hidden_dim,
            RngStream.derive(config.seed, "backbone").generator(),
        )
        return [
            ClientState(
                client_id=split.client_id,
                model=ClientModel.initialize(
                    backbone,
                    config.data.embed_dim,
                    config.data.n_classes,
                    RngStream.derive(config.seed, "init", split.client_id).generator(),
                ),
            )
            for split in splits
        ]

    def build_privatizer(self, config: RunConfig, budget: PrivacyBudget) -> PrivatizerProtocol:
        p = config.privacy
        release = p.mechanism.release
        if release == ReleaseMechanism.NONE:
            return self.privatizer_factory("none", R=p.radius(), k_per_class=p.k_per_class)
        if release == ReleaseMechanism.IGPP:
            return self.privatizer_factory(
                "igpp", R=p.radius(), sigma=budget.sigma, k_per_class=p.k_per_class
            )
        return self.privatizer_factory(
            "vpp",
            scoring_service=ScoringService(zeta=p.zeta),
            R=p.radius(),
            sigma_ref=budget.sigma,
            rho=p.rho,
            H=p.H,
            eps1=budget.eps1,
            rounds=p.rounds,
            k_per_class=p.k_per_class,
        )

    def build_attack_service(self, config: RunConfig) -> Optional[AttackServiceProtocol]:
        a = config.attack
        if not a.enabled:
            return None
        mia = self.attack_factory("mia") if a.mia else None
        fsh = (
            self.attack_factory(
                "fsh",
                steps=a.fsh_steps,
                lr=a.fsh_lr,
                tv_weight=a.fsh_tv_weight,
                batch_size=a.fsh_batch,
                patience=a.fsh_patience,
                tolerance=a.fsh_tolerance,
            )
            if a.fsh
            else None
        )
        return AttackService(
            mia,
            fsh,
            max_samples_per_class=a.max_samples_per_class,
            fsh_max_classes=a.fsh_max_classes,
            seed=config.seed,
        )

    def run_single(self, config: RunConfig, run_dir: Path, setting: Setting = None) -> RunResult:
        """
        1回分を実行して成果物を書く

        Raises:
            RoundFailedError: ラウンド中にクライアントが失敗した場合
            ExperimentError: その他の実行時エラー
        """
        handler = add_run_sink(run_dir)
        try:
            logger.info(f"Run {Path(run_dir).name}: {config.scenario.kind}")
            return self._run_single(config, Path(run_dir), setting)
        except ProtoShieldError as e:
            logger.error(f"Run {Path(run_dir).name} failed: {e}")
            raise
        except Exception as e:
            logger.error(f"Run {Path(run_dir).name} failed unexpectedly: {e}")
            raise ExperimentError(f"run {Path(run_dir).name} failed: {e}") from e
        finally:
            logger.remove(handler)

    def _run_single(self, config: RunConfig, run_dir: Path, setting: Setting) -> RunResult:
        self.repository.write_config(run_dir, config.model_dump(mode="json", exclude_none=True))
        method = config.privacy.mechanism
        splits = self.load_splits(config)
        clients = self.init_clients(config, splits)
        budget = PrivacyAccountant.plan(
            config.privacy.spec(),
            method.release,
            config.data.embed_dim,
            config.privacy.rho,
            config.privacy.H,
        )
        federation = FederationService(
            self.trainer,
            self.build_privatizer(config, budget),
            self.aggregator_factory(config.privacy.k_global),
            config.train_config(),
            seed=config.seed,
        )
        attacks = self.build_attack_service(config)

        rounds = config.privacy.rounds
        metrics, training, records = [], [], []
        last: Optional[RoundResult] = None
        for result in federation.run(clients, splits, rounds, GlobalState()):
            round_ = result.state.round - 1
            uploads = [r for m in result.uploads for r in m.payload.to_records()]
            self.repository.append_uploads(run_dir, uploads, reset=round_ == 0)
            metrics.extend(m.model_dump() for m in result.metrics)
            training.extend(t.flat() for t in result.training)
            if attacks is not None:
                run_fsh = config.attack.fsh_every_round or round_ == rounds - 1
                # 攻撃者はアップロード時点（ラウンド開始時）のモデルを見る
                records.extend(
                    attacks.attack_round(
                        round_,
                        result.uploads,
                        clients,
                        splits,
                        method.value,
                        config.privacy.epsilon,
                        run_fsh,
                    )
                )
            clients = result.clients
            last = result

        self.repository.write_table(run_dir, "metrics.csv", metrics)
        self.repository.write_table(run_dir, "training.csv", training)
        if attacks is not None:
            self.repository.write_table(run_dir, "attack.csv", [r.flat() for r in records])

        summary = self.summarize(config, budget, last, records, setting)
        if config.scenario.dump_scores:
            summary["score_mi_spearman"] = self.dump_scores(config, run_dir, clients, splits, last)
        self.repository.write_summary(run_dir, summary)
        return RunResult(
            run_dir=run_dir,
            method=method.value,
            epsilon=config.privacy.epsilon,
            seed=config.seed,
            summary=summary,
        )

    def dump_scores(
        self,
        config: RunConfig,
        run_dir: Path,
        clients: List[ClientState],
        splits: List[ClientSplit],
        last: RoundResult,
    ) -> float:
        """最終モデルの埋め込みで座標ごとのスコアと相互情報量を書き出す"""
        scoring = ScoringService(zeta=config.privacy.zeta)
        rows, correlations = [], []
        for client, split in zip(clients, splits):
            features = FeatureMatrix(
                values=client.model.encode(split.train.values), labels=split.train.labels
            )
            frame = scoring.score_frame(
                features, last.masks.get(client.client_id), config.scenario.mi_bins
            )
            correlations.append(ScoringService.score_mi_correlation(frame))
            frame.insert(0, "client_id", client.client_id)
            rows.extend(frame.to_dict(orient="records"))
        self.repository.write_table(run_dir, "scores.csv", rows)
        return float(np.mean(correlations))

    @staticmethod
    def summarize(
        config: RunConfig,
        budget: PrivacyBudget,
        last: RoundResult,
        records: List[AttackRecord],
        setting: Setting,
    ) -> Dict[str, Any]:
        """summary.json の内容（時刻などの非決定的な値は含めない）"""
        method = config.privacy.mechanism
        state = last.state
        final = state.final
        summary: Dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "method": method.value,
            "release": method.release.value,
            "dcr": method.dcr,
            "epsilon": config.privacy.epsilon,
            "delta": config.privacy.delta,
            "rounds": config.privacy.rounds,
            "seed": config.seed,
            "setting": {"name": setting[0], "value": setting[1]} if setting else None,
            "data": {
                "skew": config.data.skew,
                "n_clients": config.data.n_clients,
                "n_classes": config.data.n_classes,
                "embed_dim": config.data.embed_dim,
                "alpha": config.data.alpha if config.data.skew == "label" else None,
            },
            "budget": budget.model_dump(mode="json"),
            "accuracy": {
                "mean": final.mean,
                "std": final.std,
                "per_client": {str(k): v for k, v in sorted(final.accuracies.items())},
            },
            "round_accuracy": [e.mean for e in state.evaluations],
            "final_mean_pre_clip_norm": float(
                np.mean([m.mean_pre_clip_norm for m in last.metrics])
            ),
            "upload_size_per_round": int(sum(m.upload_size for m in last.metrics)),
        }
        if config.attack.enabled:
            summary["attack"] = {
                metric: {"mean": mean, "std": std}
                for metric, (mean, std) in AttackReport(records=records).summary().items()
            }
        return summary
