"""
クリッピング・プロトタイプ計算・公開のテスト
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from protoshield.core.domain.common import InvalidInputError
from protoshield.core.domain.data_domain import FeatureMatrix
from protoshield.core.domain.privacy_domain import PrivacyAccountant, ReleaseMechanism
from protoshield.core.domain.prototype_domain import (
    Prototype,
    PrototypeOps,
    PrototypeSet,
    ReleaseConfig,
)
from protoshield.core.domain.scoring_domain import PartitionMask


def single(vector, support: int, label: int = 0, cluster: int = 0) -> Prototype:
    return Prototype(label=label, cluster=cluster, vector=np.asarray(vector, float), support=support)


class TestHardClip:
    """全体クリッピングのテスト"""

    def test_inside_ball(self):
        np.testing.assert_allclose(PrototypeOps.hard_clip([3.0, 4.0], 10.0), [3.0, 4.0])

    def test_scaled_to_radius(self):
        np.testing.assert_allclose(PrototypeOps.hard_clip([3.0, 4.0], 2.5), [1.5, 2.0])

    def test_zero_vector(self):
        np.testing.assert_array_equal(PrototypeOps.hard_clip(np.zeros(3), 1.0), np.zeros(3))

    def test_rows_bounded(self, rng):
        clipped = PrototypeOps.hard_clip(rng.normal(0.0, 10.0, size=(100, 5)), 2.0)
        assert np.all(np.linalg.norm(clipped, axis=1) <= 2.0 + 1e-12)


class TestGroupwiseClip:
    """群ごとのクリッピングのテスト"""

    def test_unit_groups(self):
        mask = PartitionMask.from_selection([0], 2, 0.5)
        np.testing.assert_allclose(
            PrototypeOps.groupwise_clip([3.0, 4.0], mask, math.sqrt(2.0)), [1.0, 1.0]
        )

    def test_within_both_groups_unchanged(self):
        mask = PartitionMask.from_selection([0], 4, 0.25)
        z = np.array([0.1, 0.2, 0.1, 0.1])
        np.testing.assert_allclose(PrototypeOps.groupwise_clip(z, mask, 10.0), z)

    def test_differs_from_global_clipping(self):
        """全体ノルムが R ちょうどでも群 A が R_A を超えれば縮む"""
        mask = PartitionMask.from_selection([0], 4, 0.25)
        z = np.array([1.0, 0.0, 0.0, 0.0])
        clipped = PrototypeOps.groupwise_clip(z, mask, 1.0)
        np.testing.assert_allclose(PrototypeOps.hard_clip(z, 1.0), z)
        assert clipped[0] == pytest.approx(0.5)

    def test_group_bounds_hold(self, rng):
        mask = PartitionMask.from_selection([1, 4], 8, 0.25)
        clipped = PrototypeOps.groupwise_clip(rng.normal(0.0, 5.0, size=(50, 8)), mask, 3.0)
        assert np.all(np.linalg.norm(clipped[:, mask.index_A], axis=1) <= 3.0 * mask.kappa_A + 1e-12)
        assert np.all(np.linalg.norm(clipped[:, mask.index_B], axis=1) <= 3.0 * mask.kappa_B + 1e-12)
        assert np.all(np.linalg.norm(clipped, axis=1) <= 3.0 + 1e-12)

    def test_clipping_is_idempotent(self, rng):
        mask = PartitionMask.from_selection([0, 5], 8, 0.25)
        z = rng.normal(0.0, 4.0, size=(100, 8))
        z[::3] *= 0.01
        once = PrototypeOps.groupwise_clip(z, mask, 2.0)
        twice = PrototypeOps.groupwise_clip(once, mask, 2.0)
        np.testing.assert_allclose(twice, once, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(
            PrototypeOps.hard_clip(PrototypeOps.hard_clip(z, 2.0), 2.0),
            PrototypeOps.hard_clip(z, 2.0),
            rtol=1e-12,
        )

    def test_dimension_mismatch(self):
        mask = PartitionMask.from_selection([0], 4, 0.25)
        with pytest.raises(InvalidInputError, match="dimension mismatch"):
            PrototypeOps.groupwise_clip(np.zeros(3), mask, 1.0)


class TestComputePrototypes:
    """プロトタイプ計算のテスト"""

    def test_class_mean(self, rng):
        features = FeatureMatrix(values=[[1.0, 1.0], [3.0, 3.0]], labels=[0, 0])
        protos = PrototypeOps.compute_prototypes(features, 1, rng)
        np.testing.assert_allclose(protos.prototypes[0].vector, [2.0, 2.0])
        assert protos.prototypes[0].support == 2

    def test_two_clusters(self, rng):
        values = [[0.0, 0.0], [0.0, 1.0], [9.0, 9.0], [9.0, 10.0]]
        features = FeatureMatrix(values=values, labels=[0, 0, 0, 0])
        protos = PrototypeOps.compute_prototypes(features, 2, rng)
        vectors = sorted(tuple(p.vector) for p in protos.prototypes)
        assert vectors == [(0.0, 0.5), (9.0, 9.5)]
        assert [p.support for p in protos.prototypes] == [2, 2]

    def test_small_class_falls_back(self, rng, caplog):
        features = FeatureMatrix(values=[[0.0], [1.0], [5.0]], labels=[0, 0, 1])
        protos = PrototypeOps.compute_prototypes(features, 2, rng)
        assert len(protos.of_class(1)) == 1
        assert "using k=1" in caplog.text

    def test_pooled_identity(self, rng):
        """クラスごとの平均は全サンプル平均の支持数重み付き平均と一致"""
        features = FeatureMatrix(values=rng.standard_normal((30, 3)), labels=rng.integers(0, 3, 30))
        protos = PrototypeOps.compute_prototypes(features, 1, rng)
        for p in protos.prototypes:
            np.testing.assert_allclose(p.vector, features.of_class(p.label).mean(axis=0))


class TestSensitivity:
    """感度のテスト"""

    @pytest.mark.parametrize("R, n, expected", [(10.0, 50, 0.4), (10.0, 1, 20.0), (5.0, 100, 0.1)])
    def test_formula(self, R, n, expected):
        assert PrototypeOps.sensitivity(R, n) == pytest.approx(expected)

    def test_zero_support(self):
        with pytest.raises(InvalidInputError):
            PrototypeOps.sensitivity(1.0, 0)

    def test_swap_bound_by_brute_force(self, rng):
        for _ in range(50):
            n, d, R = int(rng.integers(1, 7)), int(rng.integers(2, 9)), 1.5
            mask = PartitionMask.from_selection([0], d, 0.2)
            data = rng.normal(0.0, 4.0, size=(n, d))
            for clip in (
                lambda z: PrototypeOps.hard_clip(z, R),
                lambda z: PrototypeOps.groupwise_clip(z, mask, R),
            ):
                base = clip(data).mean(axis=0)
                for i in range(n):
                    swapped = data.copy()
                    swapped[i] = -10.0 * data[i]
                    change = np.linalg.norm(clip(swapped).mean(axis=0) - base)
                    assert change <= 2.0 * R / n + 1e-9


class TestRelease:
    """IGPP / VPP 公開のテスト"""

    def test_igpp_zero_sigma_is_identity(self, rng):
        protos = PrototypeSet(prototypes=[single([1.0, 2.0], 5)])
        released = PrototypeOps.release_igpp(protos, 10.0, 0.0, rng)
        np.testing.assert_array_equal(released.prototypes[0].vector, [1.0, 2.0])

    def test_igpp_noise_level(self, rng):
        protos = PrototypeSet(prototypes=[single(np.zeros(20_000), 50)])
        released = PrototypeOps.release_igpp(protos, 10.0, 4.9, rng)
        assert released.prototypes[0].vector.std() == pytest.approx(1.96, rel=0.03)

    def test_igpp_noise_scales_with_support(self, rng):
        protos = PrototypeSet(
            prototypes=[single(np.zeros(20_000), 10, 0), single(np.zeros(20_000), 100, 1)]
        )
        released = PrototypeOps.release_igpp(protos, 1.0, 1.0, rng)
        stds = [p.vector.std() for p in released.prototypes]
        assert stds[0] / stds[1] == pytest.approx(10.0, rel=0.05)

    def test_vpp_group_noise_levels(self, rng):
        d = 10_000
        mask = PartitionMask.from_selection(np.arange(2000), d, 0.2)
        params = PrivacyAccountant.group_noise_params(mask, 1.0, 0.4)
        protos = PrototypeSet(prototypes=[single(np.zeros(d), 50)])
        vector = PrototypeOps.release_vpp(protos, mask, params, 10.0, rng).prototypes[0].vector
        delta = 0.4
        assert vector[mask.index_A].std() == pytest.approx(
            params.sigma_A * params.kappa_A * delta, rel=0.05
        )
        assert vector[mask.index_A].std() == pytest.approx(math.sqrt(0.3) * delta, rel=0.05)
        assert vector[mask.index_B].std() == pytest.approx(math.sqrt(2.4) * delta, rel=0.05)

    def test_vpp_symmetric_matches_isotropic_level(self, rng):
        d = 10_000
        mask = PartitionMask.from_selection(np.arange(5000), d, 0.5)
        params = PrivacyAccountant.group_noise_params(mask, 1.0, 1.0)
        protos = PrototypeSet(prototypes=[single(np.zeros(d), 2)])
        vector = PrototypeOps.release_vpp(protos, mask, params, 1.0, rng).prototypes[0].vector
        assert vector.std() == pytest.approx(1.0, rel=0.05)

    def test_vpp_zero_sigma_is_identity(self, rng):
        mask = PartitionMask.from_selection([0], 4, 0.25)
        params = PrivacyAccountant.group_noise_params(mask, 1.0, 1.0).model_copy(
            update={"sigma_A": 0.0, "sigma_B": 0.0}
        )
        protos = PrototypeSet(prototypes=[single([1.0, 2.0, 3.0, 4.0], 3)])
        released = PrototypeOps.release_vpp(protos, mask, params, 1.0, rng)
        np.testing.assert_array_equal(released.prototypes[0].vector, [1.0, 2.0, 3.0, 4.0])

    def test_vpp_mismatched_params(self, rng):
        mask = PartitionMask.from_selection([0], 4, 0.25)
        other = PrivacyAccountant.group_noise_params(
            PartitionMask.from_selection([0, 1], 4, 0.5), 1.0, 1.0
        )
        protos = PrototypeSet(prototypes=[single(np.zeros(4), 3)])
        with pytest.raises(InvalidInputError, match="do not match"):
            PrototypeOps.release_vpp(protos, mask, other, 1.0, rng)

    def test_singleton_support_warns(self, rng, caplog):
        protos = PrototypeSet(prototypes=[single([0.0, 0.0], 1)])
        PrototypeOps.release_igpp(protos, 1.0, 1.0, rng)
        assert "support 1" in caplog.text

    def test_release_config_requires_mask_for_vpp(self):
        with pytest.raises(ValidationError, match="PartitionMask"):
            ReleaseConfig(mechanism=ReleaseMechanism.VPP, R=1.0)


class TestPrototypeSet:
    """PrototypeSet（送信メッセージ）のテスト"""

    def test_records_restore_the_set(self):
        protos = PrototypeSet(
            client_id=2,
            round=5,
            prototypes=[single([1.0, 2.0], 3, 0), single([4.0, 5.0], 7, 1, 1)],
        )
        restored = PrototypeSet.from_records(protos.to_records())
        assert restored.client_id == 2 and restored.round == 5
        assert [(p.label, p.cluster, p.support) for p in restored.prototypes] == [
            (0, 0, 3),
            (1, 1, 7),
        ]

    def test_wire_size_is_linear_in_classes(self):
        protos = PrototypeSet(prototypes=[single(np.zeros(16), 1, c) for c in range(4)])
        assert protos.wire_size() == 4 * (16 + 5)

    def test_rejects_unordered(self):
        with pytest.raises(ValidationError, match="ordered"):
            PrototypeSet(prototypes=[single([0.0], 1, 1), single([0.0], 1, 0)])

    def test_rejects_mixed_dimensions(self):
        with pytest.raises(ValidationError, match="one dimension"):
            PrototypeSet(prototypes=[single([0.0], 1, 0), single([0.0, 1.0], 1, 1)])

    def test_records_from_several_messages(self):
        a = PrototypeSet(client_id=0, prototypes=[single([0.0], 1)]).to_records()
        b = PrototypeSet(client_id=1, prototypes=[single([0.0], 1)]).to_records()
        with pytest.raises(InvalidInputError, match="several messages"):
            PrototypeSet.from_records(a + b)
