"""
攻撃（MIA / FSH）の単体テスト
"""

import numpy as np
import pytest
from scipy.stats import spearmanr

from protoshield.adapters.attacks import (
    AttackFactory,
    FSHInversion,
    PrototypeMIA,
    diagonal_frechet,
    total_variation,
)
from protoshield.core.domain.train_domain import ClientModel
from protoshield.core.utils.numerics import finite_diff_grad


class TestPrototypeMIA:
    """PrototypeMIAのテストクラス"""

    def setup_method(self):
        self.attack = PrototypeMIA()

    def test_scores(self):
        scores = self.attack.scores([[1.0, 0.0], [3.0, 0.0]], [[0.0, 0.0], [4.0, 0.0]])
        np.testing.assert_allclose(scores, [-1.0, -1.0])

    def test_perfect_separation(self):
        metrics = self.attack.metrics([3.0, 2.0], [1.0, 0.0])
        assert metrics.roc_auc == 1.0
        assert metrics.tpr_at_1pct_fpr == 1.0
        assert metrics.advantage == 1.0
        assert metrics.f1 == 1.0

    def test_ties_give_half(self):
        assert PrototypeMIA.rank_auc([1.0, 1.0], [1.0, 1.0]) == 0.5

    def test_inverted(self):
        metrics = self.attack.metrics([0.0, 1.0], [2.0, 3.0])
        assert metrics.roc_auc == 0.0
        assert metrics.tpr_at_1pct_fpr == 0.0

    def test_auc_matches_sklearn(self, rng):
        from sklearn.metrics import roc_auc_score

        members, nonmembers = rng.normal(0.5, 1.0, 300), rng.normal(0.0, 1.0, 200)
        y = np.r_[np.ones(300), np.zeros(200)]
        expected = roc_auc_score(y, np.r_[members, nonmembers])
        assert self.attack.metrics(members, nonmembers).roc_auc == pytest.approx(expected)

    def test_empty_sets(self):
        with pytest.raises(ValueError, match="non-empty"):
            self.attack.metrics([], [1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            self.attack.scores([[1.0, 2.0]], [[1.0]])

    @pytest.mark.parametrize(
        "transform", [lambda s: 3.0 * s + 1.0, lambda s: np.exp(s / 4.0), np.arctan]
    )
    def test_monotone_transform_keeps_ranking_metrics(self, rng, transform):
        members, nonmembers = rng.normal(0.7, 1.0, 150), rng.normal(0.0, 1.0, 150)
        base = self.attack.metrics(members, nonmembers)
        moved = self.attack.metrics(transform(members), transform(nonmembers))
        assert moved.roc_auc == pytest.approx(base.roc_auc, abs=1e-12)
        assert moved.tpr_at_1pct_fpr == pytest.approx(base.tpr_at_1pct_fpr, abs=1e-12)

    def test_auc_falls_as_prototype_noise_grows(self):
        """プロトタイプの雑音が大きいほど平均 AUC は 0.5 に近づく"""
        sigmas = [0.0, 0.5, 1.0, 2.0, 4.0]
        means = []
        for sigma in sigmas:
            aucs = []
            for seed in range(40):
                rng = np.random.default_rng(seed)
                members = rng.standard_normal((5, 8))
                nonmembers = rng.standard_normal((20, 8))
                prototype = members.mean(axis=0, keepdims=True)
                prototype = prototype + sigma * rng.standard_normal(prototype.shape)
                aucs.append(
                    PrototypeMIA.rank_auc(
                        self.attack.scores(members, prototype),
                        self.attack.scores(nonmembers, prototype),
                    )
                )
            means.append(np.mean(aucs))
        assert spearmanr(sigmas, means)[0] <= 0.0
        assert means[0] > means[-1] + 0.05
        assert means[-1] == pytest.approx(0.5, abs=0.08)


class TestDiagonalFrechet:
    """cFFD のテスト"""

    def test_mean_shift(self):
        assert diagonal_frechet([[0.0], [2.0]], [[2.0], [4.0]]) == pytest.approx(4.0)

    def test_identical(self, rng):
        x = rng.standard_normal((20, 3))
        assert diagonal_frechet(x, x) == pytest.approx(0.0, abs=1e-12)

    def test_single_row_fallback(self, caplog):
        value = diagonal_frechet([[1.0, 1.0]], [[1.0, 1.0], [3.0, 3.0]])
        assert value == pytest.approx(6.0)
        assert "single reconstructions row" in caplog.text


class TestFSHInversion:
    """FSHInversionのテストクラス"""

    def setup_method(self):
        self.rng = np.random.default_rng(5)
        orthonormal, _ = np.linalg.qr(self.rng.standard_normal((6, 6)))
        self.encoder = ClientModel.initialize(np.eye(6), 6, 2, self.rng).with_params(
            adapter_W=orthonormal, adapter_b=np.zeros(6)
        )

    def test_total_variation(self):
        np.testing.assert_allclose(total_variation([[0.0, 1.0, -1.0]]), [3.0])

    def test_objective_gradient(self):
        attack = FSHInversion(tv_weight=0.1)
        x = self.rng.uniform(0.0, 1.0, size=(3, 6))
        target = self.rng.standard_normal(6)
        _, grad = attack.objective(x, target, self.encoder)
        numeric = finite_diff_grad(lambda u: attack.objective(u, target, self.encoder)[0], x.copy())
        np.testing.assert_allclose(grad, numeric, atol=1e-6)

    def test_recovers_input_for_invertible_encoder(self):
        """直交エンコーダなら最小二乗解（元の入力）に収束すること"""
        truth = self.rng.uniform(0.2, 0.8, size=(1, 6))
        target = self.encoder.encode(truth)[0]
        attack = FSHInversion(steps=6000, lr=0.01, tv_weight=0.0, batch_size=4, patience=6000, tolerance=0.0)
        result = attack.reconstruct(target, self.encoder, 6, self.rng, bounds=(0.0, 1.0))
        assert np.max(np.abs(result.inputs - truth)) < 1e-2
        assert result.loss < 1e-4
        assert result.features.shape == (4, 6)

    def test_inputs_stay_in_bounds(self):
        target = np.full(6, 100.0)
        attack = FSHInversion(steps=100, batch_size=2)
        result = attack.reconstruct(target, self.encoder, 6, self.rng, bounds=(-1.0, 2.0))
        assert np.all(result.inputs >= -1.0) and np.all(result.inputs <= 2.0)

    def test_early_stop(self):
        attack = FSHInversion(steps=5000, batch_size=2, patience=5, tolerance=1e3)
        result = attack.reconstruct(np.zeros(6), self.encoder, 6, self.rng)
        assert result.stopped_early
        assert result.steps < 5000

    def test_metrics(self):
        reference = np.array([1.0, 0.0])
        recon = np.array([[2.0, 0.0], [3.0, 0.0]])
        metrics = FSHInversion().metrics(
            recon, np.array([[1.0, 0.0], [1.5, 0.0]]), reference, {0: reference, 1: [-1.0, 0.0]}, 0
        )
        assert metrics.cosine_similarity == pytest.approx(1.0)
        assert metrics.top1_hit_pct == 100.0

    def test_metrics_unknown_class(self):
        with pytest.raises(ValueError, match="no clean prototype"):
            FSHInversion().metrics(np.ones((2, 2)), np.ones((2, 2)), np.ones(2), {0: np.ones(2)}, 3)

    def test_empty_bounds(self):
        with pytest.raises(ValueError, match="empty input range"):
            FSHInversion().reconstruct(np.zeros(6), self.encoder, 6, self.rng, bounds=(1.0, 1.0))


class TestAttackFactory:
    """AttackFactoryのテストクラス"""

    def test_create(self):
        assert isinstance(AttackFactory.create("mia"), PrototypeMIA)
        fsh = AttackFactory.create("fsh", steps=10)
        assert fsh.steps == 10

    def test_unknown(self):
        with pytest.raises(ValueError, match="Unknown attack"):
            AttackFactory.create("gradient_inversion")
