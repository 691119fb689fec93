"""
レポートサービスの実装

複数の成果物ディレクトリの summary.json を集め、
手法・ε ごとの AVG / STD 表と攻撃指標表、プロット用の縦持ち表を作る
"""

from pathlib import Path
from typing import Any, Dict, List

import pandas as pd
from loguru import logger

from ..ports.experiment_contracts import (
    SCHEMA_VERSION,
    ArtifactRepositoryProtocol,
    ReportError,
    ReportResult,
    SchemaMismatchError,
)

GROUP_KEYS = ["method", "epsilon", "setting"]
BASELINE_METHOD = "igpp"


class ReportService:
    """レポートサービスの実装"""

    def __init__(self, repository: ArtifactRepositoryProtocol):
        self.repository = repository

    def collect(self, dirs: List[Path]) -> List[Dict[str, Any]]:
        """
        summary.json を読み込み、スキーマバージョンを検査

        Raises:
            ReportError: 実行が1つも見つからない場合
            SchemaMismatchError: バージョンが混在、または未対応の場合
        """
        run_dirs = self.repository.find_runs(dirs)
        if not run_dirs:
            raise ReportError(f"no runs found under {[str(d) for d in dirs]}")
        summaries = []
        for run_dir in run_dirs:
            summary = self.repository.read_summary(run_dir)
            summary["run"] = str(run_dir)
            summaries.append(summary)

        versions = {s.get("schema_version") for s in summaries}
        if versions != {SCHEMA_VERSION}:
            raise SchemaMismatchError(
                f"cannot aggregate schema versions {sorted(map(str, versions))} "
                f"(expected {SCHEMA_VERSION})"
            )
        return summaries

    @staticmethod
    def _setting(summary: Dict[str, Any]) -> str:
        setting = summary.get("setting")
        return f"{setting['name']}={setting['value']:g}" if setting else ""

    def long_table(self, summaries: List[Dict[str, Any]]) -> pd.DataFrame:
        """1行 = (実行, 指標) の縦持ち表"""
        rows = []
        for s in summaries:
            base = {
                "run": s["run"],
                "method": s["method"],
                "epsilon": s["epsilon"],
                "seed": s["seed"],
                "setting": self._setting(s),
            }
            rows.append({**base, "metric": "accuracy_mean", "value": s["accuracy"]["mean"]})
            rows.append({**base, "metric": "accuracy_std", "value": s["accuracy"]["std"]})
            for metric, stats in sorted(s.get("attack", {}).items()):
                rows.append({**base, "metric": metric, "value": stats["mean"]})
                rows.append({**base, "metric": f"{metric}_std", "value": stats["std"]})
        return pd.DataFrame(rows)

    @staticmethod
    def accuracy_table(long: pd.DataFrame) -> pd.DataFrame:
        """
        手法・ε・設定ごとの AVG（シード平均の平均精度）と STD（クライアント間 STD の平均）

        IGPP が同じ ε・設定にあれば、その AVG との差を delta 列に入れる
        """
        wide = long[long["metric"].isin(["accuracy_mean", "accuracy_std"])].pivot_table(
            index=["run", *GROUP_KEYS], columns="metric", values="value"
        )
        table = (
            wide.reset_index()
            .groupby(GROUP_KEYS, sort=True)
            .agg(
                AVG=("accuracy_mean", "mean"),
                STD=("accuracy_std", "mean"),
                runs=("run", "count"),
            )
            .reset_index()
        )
        baseline = table[table["method"] == BASELINE_METHOD].set_index(["epsilon", "setting"])["AVG"]
        if not baseline.empty:
            keys = list(zip(table["epsilon"], table["setting"]))
            table["delta_vs_igpp"] = [
                avg - baseline[key] if key in baseline.index else float("nan")
                for avg, key in zip(table["AVG"], keys)
            ]
        return table

    @staticmethod
    def attack_table(long: pd.DataFrame) -> pd.DataFrame:
        """手法・ε ごとの攻撃指標 mean ± std（std はラウンド・クライアント間の平均）"""
        attack = long[~long["metric"].str.startswith("accuracy")]
        means = attack[~attack["metric"].str.endswith("_std")]
        stds = attack[attack["metric"].str.endswith("_std")].assign(
            metric=lambda f: f["metric"].str.removesuffix("_std")
        )
        keys = [*GROUP_KEYS, "metric"]
        table = means.groupby(keys, sort=True)["value"].mean().rename("mean").to_frame()
        table["std"] = stds.groupby(keys, sort=True)["value"].mean()
        return table.reset_index()

    def build(self, dirs: List[Path]) -> ReportResult:
        summaries = self.collect(dirs)
        long = self.long_table(summaries)
        has_attack = any("attack" in s for s in summaries)
        result = ReportResult(
            accuracy=self.accuracy_table(long),
            attack=self.attack_table(long) if has_attack else None,
            long=long,
            runs=len(summaries),
        )
        logger.info(f"Built report from {result.runs} runs")
        return result

    def write(self, report: ReportResult, out_dir: Path) -> List[Path]:
        """比較表を CSV で書き出す（攻撃表は攻撃を含む実行があるときだけ）"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        tables = {"accuracy.csv": report.accuracy, "report_long.csv": report.long}
        if report.attack is not None:
            tables["attack_report.csv"] = report.attack
        for name, frame in tables.items():
            path = out_dir / name
            frame.to_csv(path, index=False, lineterminator="\n")
            written.append(path)
        logger.info(f"Wrote {len(written)} report tables to {out_dir}")
        return written
