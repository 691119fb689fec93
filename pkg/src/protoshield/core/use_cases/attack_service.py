"""
攻撃評価サービスの実装

サーバ（または盗聴者）が見るアップロードだけを使って、
プロトタイプ距離 MIA と FSH 再構成をクライアントごとに評価する
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from ..domain.attack_domain import AttackRecord, FSHMetrics, MIAMetrics
from ..domain.common import InvalidInputError
from ..domain.data_domain import ClientSplit
from ..domain.federation_domain import RoundMessage
from ..domain.prototype_domain import PrototypeSet
from ..domain.train_domain import ClientState
from ..ports.attack_contracts import (
    AttackDivergedError,
    AttackError,
    AttackServiceProtocol,
    InversionAttackProtocol,
    MembershipAttackProtocol,
)
from ..utils.numerics import RngStream


class AttackService(AttackServiceProtocol):
    """攻撃評価サービスの実装"""

    def __init__(
        self,
        mia: Optional[MembershipAttackProtocol],
        fsh: Optional[InversionAttackProtocol],
        max_samples_per_class: int = 800,
        fsh_max_classes: int = 10,
        seed: int = 0,
    ):
        """
        Args:
            mia: メンバーシップ推論（None なら評価しない）
            fsh: 再構成攻撃（None なら評価しない）
            max_samples_per_class: MIA のクラスあたり上限（メンバー・非メンバーそれぞれ）
            fsh_max_classes: FSH で攻撃するクラス数の上限
            seed: 実行シード
        """
        self.mia = mia
        self.fsh = fsh
        self.max_samples_per_class = max_samples_per_class
        self.fsh_max_classes = fsh_max_classes
        self.seed = seed

    def membership_scores(
        self,
        upload: PrototypeSet,
        client: ClientState,
        split: ClientSplit,
        rng: np.random.Generator,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        クラスごとにメンバー（学習）と非メンバー（テスト）を同数ずつ取り、
        そのクラスの公開プロトタイプへの距離でスコア化
        """
        members, nonmembers = [], []
        for label in upload.classes:
            train = split.train.of_class(label)
            test = split.test.of_class(label)
            n = min(train.shape[0], test.shape[0], self.max_samples_per_class)
            if n == 0:
                continue
            train = train[rng.choice(train.shape[0], n, replace=False)]
            test = test[rng.choice(test.shape[0], n, replace=False)]
            protos = upload.class_matrix(label)
            members.append(self.mia.scores(client.model.encode(train), protos))
            nonmembers.append(self.mia.scores(client.model.encode(test), protos))
        if not members:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(members), np.concatenate(nonmembers)

    def attack_membership(
        self, upload: PrototypeSet, client: ClientState, split: ClientSplit, rng
    ) -> Optional[MIAMetrics]:
        members, nonmembers = self.membership_scores(upload, client, split, rng)
        if members.size == 0:
            logger.warning(f"client {client.client_id}: no class has members and non-members")
            return None
        return self.mia.metrics(members, nonmembers)

    def attack_inversion(
        self, upload: PrototypeSet, client: ClientState, split: ClientSplit, rng
    ) -> Optional[FSHMetrics]:
        """
        クラスごとに 1 個目の公開プロトタイプを狙い、指標をクラス平均する

        入力範囲はクライアントの学習データの範囲とする
        """
        clean = {
            int(label): client.model.encode(split.train.of_class(label))
            for label in split.train.classes
        }
        centers = {label: feats.mean(axis=0) for label, feats in clean.items()}
        bounds = (float(split.train.values.min()), float(split.train.values.max()))

        results: List[FSHMetrics] = []
        for label in [c for c in upload.classes if c in clean][: self.fsh_max_classes]:
            target = upload.class_matrix(label)[0]
            try:
                reconstruction = self.fsh.reconstruct(
                    target, client.model, split.train.dim, rng, bounds=bounds
                )
            except AttackDivergedError as e:
                raise AttackError(f"FSH diverged on class {label}: {e}") from e
            results.append(
                self.fsh.metrics(
                    reconstruction.features, clean[label], centers[label], centers, label
                )
            )
        if not results:
            return None
        return FSHMetrics(
            cosine_similarity=float(np.mean([r.cosine_similarity for r in results])),
            cffd=float(np.mean([r.cffd for r in results])),
            top1_hit_pct=float(np.mean([r.top1_hit_pct for r in results])),
        )

    def attack_round(
        self,
        round: int,
        uploads: List[RoundMessage],
        clients: List[ClientState],
        splits: List[ClientSplit],
        method: str,
        epsilon: float,
        run_fsh: bool,
    ) -> List[AttackRecord]:
        by_id: Dict[int, Tuple[ClientState, ClientSplit]] = {
            c.client_id: (c, s) for c, s in zip(clients, splits)
        }
        records = []
        for message in uploads:
            if message.client_id not in by_id:
                raise AttackError(f"upload from unknown client {message.client_id}")
            client, split = by_id[message.client_id]
            rng = RngStream.derive(self.seed, "attack", message.client_id, round).generator()
            try:
                mia = (
                    self.attack_membership(message.payload, client, split, rng)
                    if self.mia is not None
                    else None
                )
                fsh = (
                    self.attack_inversion(message.payload, client, split, rng)
                    if run_fsh and self.fsh is not None
                    else None
                )
            except (InvalidInputError, AttackError) as e:
                raise AttackError(
                    f"attack failed for client {message.client_id} round {round}: {e}"
                ) from e
            records.append(
                AttackRecord(
                    round=round,
                    client_id=message.client_id,
                    method=method,
                    epsilon=epsilon,
                    mia=mia,
                    fsh=fsh,
                )
            )
        logger.debug(f"Attacked {len(records)} uploads in round {round}")
        return records
