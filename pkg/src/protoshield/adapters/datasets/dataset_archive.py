"""
生成済み分割の npz 保存/読込（データセットの固定用）
"""

from pathlib import Path
from typing import List

import numpy as np
from loguru import logger

from ...core.domain.data_domain import ClientSplit, FeatureMatrix
from ...core.ports.data_contracts import DataGenerationError, DatasetArchiveProtocol


class NpzDatasetArchive(DatasetArchiveProtocol):
    """クライアント分割を1つの npz にまとめる"""

    def save(self, path: Path, splits: List[ClientSplit]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {"domains": np.asarray([s.domain or "" for s in splits])}
        for s in splits:
            prefix = f"client{s.client_id}"
            arrays[f"{prefix}_train_x"] = s.train.values
            arrays[f"{prefix}_train_y"] = s.train.labels
            arrays[f"{prefix}_test_x"] = s.test.values
            arrays[f"{prefix}_test_y"] = s.test.labels
        # np.savez は拡張子がなければ .npz を付けるので、先に揃えておく
        if path.suffix != ".npz":
            path = path.with_suffix(".npz")
        np.savez_compressed(path, **arrays)
        logger.info(f"Saved {len(splits)} client splits to {path}")
        return path

    def load(self, path: Path) -> List[ClientSplit]:
        """
        Raises:
            DataGenerationError: ファイルが無い、または形式が異なる場合
        """
        path = Path(path)
        if not path.exists():
            raise DataGenerationError(f"dataset archive not found: {path}")
        with np.load(path, allow_pickle=False) as archive:
            if "domains" not in archive.files:
                raise DataGenerationError(f"not a dataset archive: {path}")
            domains = [str(d) for d in archive["domains"]]
            splits = []
            for m, domain in enumerate(domains):
                prefix = f"client{m}"
                try:
                    train = FeatureMatrix(
                        values=archive[f"{prefix}_train_x"],
                        labels=archive[f"{prefix}_train_y"],
                    )
                    test = FeatureMatrix(
                        values=archive[f"{prefix}_test_x"],
                        labels=archive[f"{prefix}_test_y"],
                    )
                except KeyError as e:
                    raise DataGenerationError(f"archive {path} is missing {e}") from e
                splits.append(
                    ClientSplit(client_id=m, domain=domain or None, train=train, test=test)
                )
        logger.info(f"Loaded {len(splits)} client splits from {path}")
        return splits
