"""
数値計算ユーティリティ

シード付き乱数ストリーム、softmax / KL、k-means、有限差分勾配など
各モジュールが共有する最小限の数値カーネル
"""

import hashlib
from typing import Callable, List, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist
from scipy.special import rel_entr
from scipy.special import softmax as _scipy_softmax
from sklearn.cluster import kmeans_plusplus

from ..domain.common import InvalidInputError

KL_CLAMP = 1e-12
_UINT64_MAX = 2**64 - 1


class RngStream(BaseModel):
    """
    シード付き乱数ストリーム（値オブジェクト）

    同じ (seed, stream_id) からは常に同じ乱数列が得られる。
    stream_id が異なるストリームは SeedSequence の spawn_key により独立。
    """

    seed: int = Field(..., ge=0, le=_UINT64_MAX, description="実行全体のシード")
    stream_id: int = Field(
        default=0, ge=0, le=_UINT64_MAX, description="用途別のストリームID"
    )

    model_config = ConfigDict(frozen=True)

    @classmethod
    def derive(cls, seed: int, *keys: object) -> "RngStream":
        """クライアント・ラウンド・用途などのキーからストリームを導出"""
        return cls(seed=seed, stream_id=derive_stream_id(*keys))

    def child(self, *keys: object) -> "RngStream":
        """このストリームから派生したストリームを作成"""
        return RngStream(
            seed=self.seed, stream_id=derive_stream_id(self.stream_id, *keys)
        )

    def generator(self) -> np.random.Generator:
        """新しい Generator を先頭から生成"""
        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id,)
        )
        return np.random.Generator(np.random.PCG64(sequence))


def derive_stream_id(*keys: object) -> int:
    """キー列から64bitのストリームIDを導出"""
    text = "/".join(str(key) for key in keys)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """2次元 float64 配列に変換し、有限値であることを検証"""
    array = np.asarray(data, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2 or array.shape[0] == 0 or array.shape[1] == 0:
        raise InvalidInputError(f"{name} must be a non-empty 2-d array")
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return array


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """
    温度付き softmax（最後の軸方向）

    Args:
        logits: ロジット（ベクトルまたは行ごとのバッチ）
        temperature: 温度 τ > 0

    Returns:
        確率ベクトル（和は1）

    Raises:
        InvalidInputError: 温度が正でない、またはロジットが有限でない場合
    """
    if temperature <= 0:
        raise InvalidInputError(f"temperature must be positive: {temperature}")
    values = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("logits contain non-finite entries")
    # scipy の softmax は最大値を引いてから指数を取る
    return _scipy_softmax(values / temperature, axis=-1)


def kl_divergence(p, q) -> np.ndarray:
    """
    KL(p‖q) = Σ p_i ln(p_i / q_i)

    q は [1e-12, 1] にクランプしてから対数を取る。p_i = 0 の項は 0。
    バッチ入力（行ごと）の場合は行ごとの値を返す。
    """
    p_arr = np.asarray(p, dtype=np.float64)
    q_arr = np.asarray(q, dtype=np.float64)
    if p_arr.shape != q_arr.shape:
        raise InvalidInputError(
            f"length mismatch: p{p_arr.shape} vs q{q_arr.shape}"
        )
    q_arr = np.clip(q_arr, KL_CLAMP, 1.0)
    return np.sum(rel_entr(p_arr, q_arr), axis=-1)


class KMeansResult(BaseModel):
    """k-means の結果"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    centroids: np.ndarray
    assignment: np.ndarray
    inertia_history: List[float] = Field(default_factory=list)

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1] if self.inertia_history else 0.0


def kmeans(
    points, k: int, iters: int, rng: np.random.Generator
) -> KMeansResult:
    """
    k-means++ 初期化 + Lloyd 反復

    空クラスタは現在の重心から最も遠い点で再シードする。

    Raises:
        InvalidInputError: k が点の数を超える場合
    """
    x = as_matrix(points, "points")
    n = x.shape[0]
    if k < 1 or k > n:
        raise InvalidInputError(f"k must be in [1, {n}]: {k}")
    if iters < 1:
        raise InvalidInputError(f"iters must be positive: {iters}")

    centroids, _ = kmeans_plusplus(
        x, n_clusters=k, random_state=int(rng.integers(0, 2**31 - 1))
    )
    centroids = centroids.astype(np.float64)

    history: List[float] = []
    assignment = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        distances = cdist(x, centroids, metric="sqeuclidean")
        assignment = np.argmin(distances, axis=1)
        history.append(float(distances[np.arange(n), assignment].sum()))

        updated = centroids.copy()
        for cluster in range(k):
            members = x[assignment == cluster]
            if len(members) > 0:
                updated[cluster] = members.mean(axis=0)
                continue
            # 空クラスタ: 最も遠い点へ移す
            nearest = distances[np.arange(n), assignment]
            farthest = int(np.argmax(nearest))
            logger.debug(f"Re-seeding empty cluster {cluster} at point {farthest}")
            updated[cluster] = x[farthest]
            assignment[farthest] = cluster
            distances[farthest, :] = 0.0

        if np.allclose(updated, centroids, rtol=0.0, atol=1e-12):
            centroids = updated
            break
        centroids = updated

    distances = cdist(x, centroids, metric="sqeuclidean")
    assignment = np.argmin(distances, axis=1)
    history.append(float(distances[np.arange(n), assignment].sum()))
    return KMeansResult(
        centroids=centroids, assignment=assignment, inertia_history=history
    )


def finite_diff_grad(
    f: Callable[[np.ndarray], float], x, h: float = 1e-5
) -> np.ndarray:
    """中心差分 (f(x+h e_i) − f(x−h e_i)) / 2h による勾配"""
    base = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        upper = f(base)
        flat[i] = original - h
        lower = f(base)
        flat[i] = original
        grad_flat[i] = (upper - lower) / (2.0 * h)
    return grad


def relative_error(a, b, floor: float = 1e-8) -> float:
    """max|a−b| / max(max|a|, max|b|, floor)（配列全体のスケールで正規化）"""
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    scale = max(float(np.max(np.abs(a_arr))), float(np.max(np.abs(b_arr))), floor)
    return float(np.max(np.abs(a_arr - b_arr))) / scale


def pairwise_sq_distances(a, b) -> np.ndarray:
    """行同士の二乗ユークリッド距離"""
    return cdist(np.atleast_2d(a), np.atleast_2d(b), metric="sqeuclidean")


def row_norms(x) -> np.ndarray:
    return np.linalg.norm(np.atleast_2d(x), axis=1)


def split_indices(n: int, fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    n 個の添字をシャッフルして (先頭 fraction, 残り) に分割

    n ≥ 2 ならどちらも 1 個以上になるよう切れ目を丸める
    """
    order = rng.permutation(n)
    cut = int(round(n * fraction))
    if n >= 2:
        cut = min(max(cut, 1), n - 1)
    return np.sort(order[:cut]), np.sort(order[cut:])
