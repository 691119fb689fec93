"""
合成データ生成の単体テスト
"""

import numpy as np
import pytest

from protoshield.adapters.datasets import (
    DatasetFactory,
    DomainSkewGenerator,
    LabelSkewGenerator,
    NpzDatasetArchive,
    dirichlet_partition,
)
from protoshield.adapters.datasets.domain_skew import stratified_split
from protoshield.core.domain.data_domain import FeatureMatrix
from protoshield.core.ports.data_contracts import DataGenerationError, PoolTooSmallError
from protoshield.core.utils.numerics import RngStream


class TestDomainSkewGenerator:
    """DomainSkewGeneratorのテストクラス"""

    def setup_method(self):
        self.generator = DomainSkewGenerator(
            n_clients=3, n_classes=4, input_dim=8, samples_per_class=10, test_fraction=0.3
        )
        self.stream = RngStream(seed=42)

    def test_shapes(self):
        splits = self.generator.generate(self.stream)
        assert [s.client_id for s in splits] == [0, 1, 2]
        for split in splits:
            assert split.train.dim == split.test.dim == 8
            assert split.n_train + split.n_test == 40
            assert split.train.class_counts() == {c: 7 for c in range(4)}
            assert split.test.class_counts() == {c: 3 for c in range(4)}

    def test_shared_class_means_and_orthogonal_rotations(self):
        specs = self.generator.domains(self.stream)
        for spec in specs:
            np.testing.assert_array_equal(spec.base_means, specs[0].base_means)
            np.testing.assert_allclose(spec.rotation @ spec.rotation.T, np.eye(8), atol=1e-9)
        assert specs[0].min_margin() == pytest.approx(4.0)
        assert not np.allclose(specs[0].rotation, specs[1].rotation)

    def test_deterministic(self):
        first = self.generator.generate(self.stream)
        second = self.generator.generate(RngStream(seed=42))
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.train.values, b.train.values)
            np.testing.assert_array_equal(a.test.labels, b.test.labels)

    def test_seed_changes_data(self):
        first = self.generator.generate(self.stream)[0]
        other = self.generator.generate(RngStream(seed=43))[0]
        assert not np.allclose(first.train.values, other.train.values)

    def test_identity_transforms(self):
        generator = DomainSkewGenerator(
            n_clients=2, n_classes=2, input_dim=3, samples_per_class=4, identity_transforms=True
        )
        specs = generator.domains(self.stream)
        np.testing.assert_array_equal(specs[1].rotation, np.eye(3))
        np.testing.assert_array_equal(specs[1].shift, np.zeros(3))

    def test_degenerate_margin_warning(self, caplog):
        DomainSkewGenerator(n_clients=1, margin=0.5, noise_scale=1.0).domains(self.stream)
        assert "degenerate class margin" in caplog.text

    def test_single_class(self):
        with pytest.raises(DataGenerationError):
            DomainSkewGenerator(n_classes=1)


class TestDirichletPartition:
    """dirichlet_partitionのテストクラス"""

    def test_covers_every_sample_once(self, rng):
        labels = np.repeat(np.arange(5), 40)
        parts = dirichlet_partition(labels, 4, 0.5, rng)
        merged = np.sort(np.concatenate(parts))
        np.testing.assert_array_equal(merged, np.arange(200))
        assert min(len(p) for p in parts) >= 2

    def test_small_alpha_is_skewed(self, rng):
        labels = np.repeat(np.arange(4), 500)
        skewed = dirichlet_partition(labels, 4, 0.05, rng)
        balanced = dirichlet_partition(labels, 4, 1000.0, rng)

        def dominant_share(parts):
            return np.mean([np.bincount(labels[p], minlength=4).max() / len(p) for p in parts])

        assert dominant_share(skewed) > 0.5
        assert dominant_share(balanced) < 0.35

    def test_huge_alpha_is_near_uniform(self, rng):
        labels = np.repeat(np.arange(4), 500)
        for part in dirichlet_partition(labels, 4, 1e6, rng):
            proportions = np.bincount(labels[part], minlength=4) / len(part)
            np.testing.assert_allclose(proportions, 0.25, atol=0.05)

    def test_repair_when_draws_keep_failing(self, rng, caplog):
        labels = np.zeros(8, dtype=int)
        parts = dirichlet_partition(labels, 4, 0.01, rng, min_samples=2, max_redraws=1)
        assert sorted(len(p) for p in parts) == [2, 2, 2, 2]

    def test_pool_too_small(self, rng):
        with pytest.raises(PoolTooSmallError):
            dirichlet_partition(np.zeros(5, dtype=int), 3, 1.0, rng)

    def test_invalid_alpha(self, rng):
        with pytest.raises(DataGenerationError):
            dirichlet_partition(np.zeros(10, dtype=int), 2, 0.0, rng)


class TestLabelSkewGenerator:
    """LabelSkewGeneratorのテストクラス"""

    def test_generate(self):
        generator = LabelSkewGenerator(
            n_clients=5, n_classes=3, input_dim=6, samples_per_class=30, alpha=0.3
        )
        splits = generator.generate(RngStream(seed=0))
        assert len(splits) == 5
        assert sum(s.n_train + s.n_test for s in splits) == 90
        assert all(s.n_train >= 1 and s.n_test >= 1 for s in splits)
        assert all(s.domain == "pool" for s in splits)

    @pytest.mark.parametrize("seed", range(5))
    def test_split_is_stratified_per_class(self, seed):
        """強いスキューでも、クライアントが持つクラスは必ず学習側に入る"""
        generator = LabelSkewGenerator(
            n_clients=10, n_classes=10, input_dim=4, samples_per_class=20, alpha=0.1
        )
        for split in generator.generate(RngStream(seed=seed)):
            counts = FeatureMatrix.concat([split.train, split.test]).class_counts()
            assert split.n_test >= 1
            if max(counts.values()) < 2:
                continue  # 全クラス 1 件ずつ
            assert set(split.test.class_counts()) <= set(split.train.class_counts())

    def test_singleton_class_goes_to_train(self):
        data = FeatureMatrix(
            values=np.arange(10, dtype=float).reshape(5, 2), labels=[0, 0, 0, 0, 1]
        )
        train, test = stratified_split(data, 0.5, np.random.default_rng(0))
        assert train.class_counts()[1] == 1
        assert 1 not in test.class_counts()
        assert train.n + test.n == 5

    def test_all_singletons_still_leave_a_test_sample(self):
        data = FeatureMatrix(values=np.eye(3), labels=[0, 1, 2])
        train, test = stratified_split(data, 0.5, np.random.default_rng(0))
        assert (train.n, test.n) == (2, 1)


class TestNpzDatasetArchive:
    """NpzDatasetArchiveのテストクラス"""

    def test_save_and_load(self, tmp_path):
        splits = DomainSkewGenerator(
            n_clients=2, n_classes=2, input_dim=3, samples_per_class=4
        ).generate(RngStream(seed=1))
        archive = NpzDatasetArchive()
        path = archive.save(tmp_path / "data", splits)
        assert path.suffix == ".npz"
        loaded = archive.load(path)
        assert [s.domain for s in loaded] == ["domain0", "domain1"]
        np.testing.assert_array_equal(loaded[1].test.values, splits[1].test.values)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataGenerationError, match="not found"):
            NpzDatasetArchive().load(tmp_path / "missing.npz")

    def test_not_an_archive(self, tmp_path):
        path = tmp_path / "other.npz"
        np.savez(path, x=np.zeros(2))
        with pytest.raises(DataGenerationError, match="not a dataset archive"):
            NpzDatasetArchive().load(path)


class TestDatasetFactory:
    """DatasetFactoryのテストクラス"""

    def test_create(self):
        assert isinstance(DatasetFactory.create("label", alpha=0.1), LabelSkewGenerator)
        assert isinstance(DatasetFactory.create("domain"), DomainSkewGenerator)

    def test_unknown(self):
        with pytest.raises(ValueError, match="Unknown skew"):
            DatasetFactory.create("feature")
