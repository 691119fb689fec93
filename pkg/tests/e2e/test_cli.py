import json

import pytest
from typer.testing import CliRunner

from protoshield import __version__, cli

runner = CliRunner()

TINY = [
    "data.n_clients=2",
    "data.n_classes=2",
    "data.input_dim=4",
    "data.hidden_dim=6",
    "data.embed_dim=4",
    "data.samples_per_class=10",
    "privacy.rounds=2",
    "train.epochs=1",
]


def tiny_args(*extra: str) -> list[str]:
    args = []
    for override in [*TINY, *extra]:
        args.extend(["--set", override])
    return args


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    """成果物の出力先を一時ディレクトリに向ける"""
    root = tmp_path / "runs"
    monkeypatch.setenv("PROTOSHIELD_OUTPUT_ROOT", str(root))
    return root


class TestCLICommands:
    """CLIコマンドのヘルプ表示テスト"""

    def test_version(self):
        result = runner.invoke(cli.app, ["--version"])
        assert result.exit_code == 0
        assert f"protoshield version {__version__}" in result.stdout

    def test_run_command_help(self):
        """runコマンドのヘルプ"""
        result = runner.invoke(cli.app, ["run", "--help"])
        assert result.exit_code == 0
        assert "Run the configured scenario" in result.stdout

    def test_report_command_help(self):
        """reportコマンドのヘルプ"""
        result = runner.invoke(cli.app, ["report", "--help"])
        assert result.exit_code == 0
        assert "Aggregate run summaries" in result.stdout

    def test_selftest_command_help(self):
        """selftestコマンドのヘルプ"""
        result = runner.invoke(cli.app, ["selftest", "--help"])
        assert result.exit_code == 0
        assert "privacy and numerics checks" in result.stdout


class TestRunCommand:
    """runコマンドの終了コードと成果物"""

    def test_run_writes_artifacts(self, tmp_path):
        out = tmp_path / "scenario"
        result = runner.invoke(cli.app, ["run", *tiny_args(), "--output", str(out)])

        assert result.exit_code == 0, result.stdout
        run_dir = out / "vpdr_eps1_seed0"
        assert (run_dir / "summary.json").exists()
        assert (out / "comparison.csv").exists()
        assert "vpdr_eps1_seed0" in result.stdout

    def test_log_level_option(self, tmp_path):
        """--log-level はサブコマンドの前に置く"""
        result = runner.invoke(
            cli.app, ["--log-level", "warning", "run", *tiny_args(), "--output", str(tmp_path)]
        )
        assert result.exit_code == 0, result.stdout
        assert cli.state["log_level"] == "warning"

    def test_run_defaults_under_output_root(self, output_root):
        """--output を省略するとシナリオ種別のディレクトリに書く"""
        result = runner.invoke(cli.app, ["run", *tiny_args(), "--seed", "4"])

        assert result.exit_code == 0, result.stdout
        assert (output_root / "train" / "vpdr_eps1_seed4" / "summary.json").exists()

    def test_run_is_deterministic(self, tmp_path):
        """同じ設定・シードなら summary.json がバイト単位で一致する"""
        for name in ("a", "b"):
            result = runner.invoke(
                cli.app, ["run", *tiny_args(), "--seed", "7", "--output", str(tmp_path / name)]
            )
            assert result.exit_code == 0, result.stdout

        first = (tmp_path / "a" / "vpdr_eps1_seed7" / "summary.json").read_bytes()
        second = (tmp_path / "b" / "vpdr_eps1_seed7" / "summary.json").read_bytes()
        assert first == second
        assert json.loads(first)["seed"] == 7

    def test_invalid_value_exits_with_config_error(self, tmp_path):
        result = runner.invoke(
            cli.app, ["run", *tiny_args("privacy.rho=0.9"), "--output", str(tmp_path)]
        )
        assert result.exit_code == cli.EXIT_CONFIG
        assert "Config error" in result.stdout
        assert "rho" in result.stdout

    def test_missing_config_file_exits_with_config_error(self, tmp_path):
        result = runner.invoke(cli.app, ["run", "--config", str(tmp_path / "missing.toml")])
        assert result.exit_code == cli.EXIT_CONFIG

    def test_runtime_failure_exits_with_runtime_error(self, tmp_path):
        """存在しないデータセットアーカイブの読込は実行時エラー"""
        missing = tmp_path / "nowhere.npz"
        result = runner.invoke(
            cli.app,
            ["run", *tiny_args(f'data.load_path="{missing}"'), "--output", str(tmp_path / "out")],
        )
        assert result.exit_code == cli.EXIT_RUNTIME
        assert "Run failed" in result.stdout


class TestReportCommand:
    """reportコマンドの集計"""

    def test_report_after_sweep(self, tmp_path):
        out = tmp_path / "sweep"
        args = tiny_args(
            'scenario.kind="sweep"',
            'scenario.methods=["none", "igpp"]',
            "scenario.epsilons=[1.0]",
        )
        assert runner.invoke(cli.app, ["run", *args, "--output", str(out)]).exit_code == 0

        result = runner.invoke(cli.app, ["report", str(out), "--output", str(tmp_path / "report")])

        assert result.exit_code == 0, result.stdout
        assert "Accuracy (2 runs)" in result.stdout
        assert (tmp_path / "report" / "accuracy.csv").exists()
        assert (tmp_path / "report" / "report_long.csv").exists()

    def test_report_without_runs_fails(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(cli.app, ["report", str(empty)])
        assert result.exit_code == cli.EXIT_RUNTIME
        assert "Report failed" in result.stdout
