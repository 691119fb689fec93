"""
ScoringServiceの単体テスト
"""

import numpy as np
import pandas as pd
import pytest

from protoshield.core.domain.data_domain import FeatureMatrix
from protoshield.core.ports.prototype_contracts import ScoringError
from protoshield.core.use_cases.scoring_service import ScoringService


class TestScoringService:
    """ScoringServiceのテストクラス"""

    def setup_method(self):
        self.service = ScoringService()

    def test_partition_size(self, separable_features, rng):
        mask = self.service.private_partition(separable_features, 0.25, 0.1, 1.0, 20, rng)
        assert mask.d == 8
        assert mask.d_A == 2

    def test_strong_budget_selects_signal(self, separable_features, rng):
        """十分な予算と大きな H なら信号座標が選ばれること"""
        mask = self.service.private_partition(separable_features, 0.125, 200.0, 1e5, 1, rng)
        assert mask.index_A.tolist() == [0]

    def test_score_frame(self, separable_features):
        frame = self.service.score_frame(separable_features)
        assert isinstance(frame, pd.DataFrame)
        assert len(frame) == 8
        assert {"score", "mutual_information"} <= set(frame.columns)
        assert frame["score"].idxmax() == 0

    def test_score_frame_single_class(self, rng):
        features = FeatureMatrix(values=rng.standard_normal((10, 3)), labels=np.zeros(10))
        with pytest.raises(ScoringError):
            self.service.score_frame(features)

    @pytest.mark.parametrize(
        "values, labels",
        [
            (np.arange(12.0).reshape(4, 3), [2, 2, 2, 2]),
            (np.ones((1, 3)), [0]),
            (np.arange(6.0).reshape(2, 3), [0, 1]),
        ],
    )
    def test_undefined_scores_fall_back_to_zero(self, values, labels, rng):
        """単一クラスや n ≤ C のクライアントでもマスクを返すこと"""
        features = FeatureMatrix(values=values, labels=labels)
        np.testing.assert_array_equal(self.service.clipped_scores(features, 0.1), np.zeros(3))
        mask = self.service.private_partition(features, 0.34, 0.1, 0.1, 20, rng)
        assert mask.d_A == 2

    def test_zero_scores_give_uniform_selection(self):
        features = FeatureMatrix(values=np.ones((3, 4)), labels=[1, 1, 1])
        counts = np.zeros(4)
        for seed in range(2000):
            mask = self.service.private_partition(
                features, 0.25, 0.1, 0.1, 20, np.random.default_rng(seed)
            )
            counts[mask.index_A] += 1
        np.testing.assert_allclose(counts / 2000, 0.25, atol=0.04)

    def test_default_budget_selection_is_near_chance(self, rng):
        """
        既定設定（H=0.1, ε₁=0.1, T=20）では λ/H = 2·d_A·T/ε₁ = 1600 となり、
        信号座標が I_A に入る頻度は d_A/d とほぼ変わらない
        """
        labels = np.repeat([0, 1], 200)
        values = rng.standard_normal((400, 16))
        values[:, :4] += np.where(labels == 1, 3.0, -3.0)[:, None]
        features = FeatureMatrix(values=values, labels=labels)
        overlap = []
        for _ in range(2000):
            mask = self.service.private_partition(features, 0.2, 0.1, 0.1, 20, rng)
            overlap.append(np.isin(np.arange(4), mask.index_A).mean())
        assert np.mean(overlap) == pytest.approx(0.25, abs=0.03)

    def test_score_mi_correlation(self, rng):
        n, d = 3000, 12
        labels = rng.integers(0, 2, size=n)
        values = rng.standard_normal((n, d))
        values += np.where(labels == 1, 1.0, -1.0)[:, None] * np.linspace(0.0, 1.5, d)
        frame = self.service.score_frame(FeatureMatrix(values=values, labels=labels))
        assert ScoringService.score_mi_correlation(frame) >= 0.7

    def test_constant_column_correlation(self):
        frame = pd.DataFrame({"score": [1.0, 1.0], "mutual_information": [0.1, 0.2]})
        assert ScoringService.score_mi_correlation(frame) == 0.0
