"""
実験設定（RunConfig）

TOML ファイルを読み込み、`--set section.key=value` で上書きし、
成果物ディレクトリへスナップショットを書き戻す
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..core.domain.privacy_domain import Method, PrivacySpec
from ..core.domain.train_domain import TrainConfig
from ..core.ports.experiment_contracts import SCHEMA_VERSION, ConfigError

ScenarioKind = Literal["train", "train_attack", "ablation", "sweep", "label_skew", "hyper"]
HYPER_KEYS = {
    "split_ratio": "privacy",
    "rho": "privacy",
    "gamma": "train",
    "beta": "train",
    "tau": "train",
    "lambda1": "train",
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSection(_Section):
    """合成データ"""

    skew: Literal["domain", "label"] = "domain"
    n_clients: int = Field(default=4, ge=1)
    n_classes: int = Field(default=4, ge=2)
    input_dim: int = Field(default=32, ge=1)
    hidden_dim: int = Field(default=64, ge=1)
    embed_dim: int = Field(default=16, ge=2)
    samples_per_class: int = Field(default=48, ge=2)
    test_fraction: float = Field(default=0.5, gt=0.0, lt=1.0)
    noise_scale: float = Field(default=1.0, gt=0.0)
    margin: float = Field(default=4.0, gt=0.0)
    shift_scale: float = Field(default=1.0, ge=0.0)
    identity_transforms: bool = False
    alpha: float = Field(default=0.5, gt=0.0, description="Dirichlet 集中度")
    dump_path: Optional[str] = None
    load_path: Optional[str] = None


class PrivacySection(_Section):
    """プライバシーと公開機構"""

    mechanism: Method = Method.VPDR
    epsilon: float = Field(default=1.0, gt=0.0)
    delta: float = Field(default=1e-5, gt=0.0, lt=1.0)
    rounds: int = Field(default=20, ge=1)
    split_ratio: float = Field(default=0.1, gt=0.0, lt=1.0)
    rho: float = Field(default=0.2, gt=0.0, le=0.5)
    H: float = Field(default=0.1, gt=0.0)
    R: float = Field(default=10.0, gt=0.0)
    R_igpp: Optional[float] = Field(default=None, gt=0.0, description="IGPP 専用の R")
    R_vpp: Optional[float] = Field(default=None, gt=0.0, description="VPP 専用の R")
    k_per_class: int = Field(default=1, ge=1)
    k_global: int = Field(default=1, ge=1)
    zeta: float = Field(default=1e-6, gt=0.0)

    def spec(self) -> PrivacySpec:
        return PrivacySpec(
            epsilon=self.epsilon,
            delta=self.delta,
            rounds=self.rounds,
            split_ratio=self.split_ratio,
        )

    def radius(self) -> float:
        """手法に応じたクリッピング半径"""
        release = self.mechanism.release.value
        if release == "igpp" and self.R_igpp is not None:
            return self.R_igpp
        if release == "vpp" and self.R_vpp is not None:
            return self.R_vpp
        return self.R


class TrainSection(_Section):
    """ローカル学習"""

    gamma: float = Field(default=0.05, gt=0.0, lt=1.0)
    beta: float = Field(default=0.999, ge=0.0, lt=1.0)
    tau: float = Field(default=4.0, gt=0.0)
    lambda1: float = Field(default=0.05, ge=0.0)
    lambda_proto: float = Field(default=0.1, ge=0.0)
    lr: float = Field(default=1e-3, gt=0.0)
    weight_decay: float = Field(default=1e-5, ge=0.0)
    epochs: int = Field(default=5, ge=1)
    batch_size: int = Field(default=16, ge=1)

    def to_train_config(self, clip_radius: float, dcr: bool) -> TrainConfig:
        """DCR を使わない手法ではソフトクリップも蒸留も行わない"""
        params = self.model_dump()
        if not dcr:
            params["lambda1"] = 0.0
        return TrainConfig(**params, clip_radius=clip_radius, dcr=dcr)


class AttackSection(_Section):
    """攻撃評価"""

    enabled: bool = False
    mia: bool = True
    fsh: bool = True
    fsh_every_round: bool = False
    max_samples_per_class: int = Field(default=800, ge=1)
    fsh_max_classes: int = Field(default=10, ge=1)
    fsh_batch: int = Field(default=16, ge=1)
    fsh_steps: int = Field(default=2000, ge=1)
    fsh_lr: float = Field(default=0.01, gt=0.0)
    fsh_tv_weight: float = Field(default=0.0, ge=0.0)
    fsh_patience: int = Field(default=300, ge=1)
    fsh_tolerance: float = Field(default=1e-6, ge=0.0)


class ScenarioSection(_Section):
    """シナリオ（スイープ・アブレーション）"""

    kind: ScenarioKind = "train"
    methods: List[Method] = Field(
        default_factory=lambda: [Method.NONE, Method.IGPP, Method.VPDR]
    )
    epsilons: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    seeds: List[int] = Field(
        default_factory=list, description="空ならトップレベルの seed だけを使う"
    )
    alphas: List[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0, 5.0, 10.0])
    hyper: Dict[str, List[float]] = Field(default_factory=dict)
    dump_scores: bool = False
    mi_bins: int = Field(default=16, ge=2)

    @field_validator("epsilons", "alphas")
    @classmethod
    def validate_positive(cls, v: List[float]) -> List[float]:
        if any(value <= 0 for value in v):
            raise ValueError("values must be positive")
        return v

    @field_validator("hyper")
    @classmethod
    def validate_hyper(cls, v: Dict[str, List[float]]) -> Dict[str, List[float]]:
        unknown = set(v) - set(HYPER_KEYS)
        if unknown:
            raise ValueError(f"unknown hyper-parameters: {sorted(unknown)}")
        return v


class RunConfig(_Section):
    """実験設定全体"""

    schema_version: int = SCHEMA_VERSION
    seed: int = Field(default=0, ge=0)
    output_dir: Optional[str] = None
    data: DataSection = Field(default_factory=DataSection)
    privacy: PrivacySection = Field(default_factory=PrivacySection)
    train: TrainSection = Field(default_factory=TrainSection)
    attack: AttackSection = Field(default_factory=AttackSection)
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)

    @field_validator("schema_version")
    @classmethod
    def validate_schema(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v} (expected {SCHEMA_VERSION})")
        return v

    def train_config(self) -> TrainConfig:
        method = self.privacy.mechanism
        return self.train.to_train_config(self.privacy.radius(), method.dcr)

    def with_updates(self, updates: Dict[str, Any]) -> "RunConfig":
        """ドット区切りキーで上書きした新しい設定（検証つき）"""
        data = self.model_dump(mode="json")
        for key, value in updates.items():
            _assign(data, key, value)
        return validate_config(data)

    def to_toml(self) -> str:
        """スナップショット用の TOML（None は省略）"""
        return tomli_w.dumps(self.model_dump(mode="json", exclude_none=True))


def _assign(data: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            raise ConfigError("unknown section", key=key)
        node = child
    node[parts[-1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    """
    `section.key=value` を解析

    値は TOML リテラルとして解釈し、できなければ文字列として扱う
    """
    if "=" not in text:
        raise ConfigError(f"override must look like section.key=value: {text!r}")
    key, raw = (part.strip() for part in text.split("=", 1))
    if not key:
        raise ConfigError(f"empty key in override: {text!r}")
    try:
        value = tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def validate_config(data: Dict[str, Any]) -> RunConfig:
    """
    辞書を検証して RunConfig にする

    Raises:
        ConfigError: 最初に違反したキーのパスつき
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(first["msg"], key=key) from e


def load_config(
    path: Optional[Path] = None, overrides: Optional[List[str]] = None
) -> RunConfig:
    """
    TOML ファイルを読み込み、上書きを適用

    Args:
        path: 設定ファイル（None なら既定値）
        overrides: `section.key=value` のリスト

    Raises:
        ConfigError: 読み込みまたは検証に失敗した場合
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"invalid TOML in {path}: {e}") from e

    base = validate_config(data)
    updates = dict(parse_override(item) for item in overrides or [])
    return base.with_updates(updates) if updates else base
