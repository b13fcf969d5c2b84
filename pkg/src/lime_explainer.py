"""
LIME 风格的局部解释
在测试记录附近按训练集边缘分布做高斯扰动，用指数核按距离加权，
再拟合带岭惩罚的加权线性模型，局部模型的输出就是 LIME 的预测值
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import lstsq

from errors import ArgumentError, DegenerateWeightsError
from svr_model import SvrModel, predict_svr

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LimeParams:
    """
    :param n_samples: 每条记录的扰动样本数 (含第 0 行的原始记录)
    :param kernel_width: 指数核宽度，None 时取 0.75 * sqrt(d)
    :param n_features_used: 局部模型保留的特征数，None 表示全部
    :param ridge_lambda: 岭惩罚系数，截距不受惩罚
    :param seed: 随机种子
    """
    n_samples: int = 5000
    kernel_width: Optional[float] = None
    n_features_used: Optional[int] = None
    ridge_lambda: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 10:
            raise ArgumentError(f"n_samples 至少为 10: {self.n_samples}")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ArgumentError(f"kernel_width 必须大于 0: {self.kernel_width}")
        if self.n_features_used is not None and self.n_features_used < 1:
            raise ArgumentError(f"n_features_used 至少为 1: {self.n_features_used}")
        if not self.ridge_lambda >= 0:
            raise ArgumentError(f"ridge_lambda 不能为负: {self.ridge_lambda}")
        if self.seed < 0:
            raise ArgumentError(f"seed 不能为负: {self.seed}")

    def width_for(self, d: int) -> float:
        return self.kernel_width if self.kernel_width is not None else 0.75 * math.sqrt(d)

    def k_for(self, d: int) -> int:
        return d if self.n_features_used is None else min(self.n_features_used, d)


@dataclass(frozen=True, eq=False)
class TrainStats:
    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def from_matrix(cls, X) -> "TrainStats":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        mean = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1) if X.shape[0] >= 2 else np.zeros(X.shape[1])
        return cls(mean=mean, sd=np.where(np.isfinite(sd), sd, 0.0))

    @property
    def n_features(self) -> int:
        return int(self.mean.shape[0])

    def distance_scale(self) -> np.ndarray:
        # sd 为 0 的特征按原尺度计距离
        return np.where(self.sd > 0, self.sd, 1.0)


@dataclass(frozen=True, eq=False)
class Explanation:
    instance: np.ndarray
    selected_features: tuple[int, ...]
    weights: np.ndarray
    intercept: float
    local_prediction: float
    blackbox_prediction: float
    index: int = -1
    seed: int = 0

    @property
    def squared_error(self) -> float:
        return (self.local_prediction - self.blackbox_prediction) ** 2

    def as_pairs(self, names: Optional[Sequence[str]] = None) -> list[tuple[str, float]]:
        pairs = []
        for j, w in zip(self.selected_features, self.weights):
            label = names[j] if names is not None else f"x{j}"
            pairs.append((label, float(w)))
        return pairs


def perturb(instance, train_stats: TrainStats, n: int, seed: int) -> np.ndarray:
    """
    按训练集每个特征的均值/标准差独立采样 n 行，第 0 行是原始记录
    """
    x = np.asarray(instance, dtype=np.float64).ravel()
    if x.shape[0] != train_stats.n_features:
        raise ArgumentError(f"维度不匹配: 记录 {x.shape[0]} 维, 训练统计量 {train_stats.n_features} 维")
    if n < 1:
        raise ArgumentError(f"扰动样本数至少为 1: {n}")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, x.shape[0])) * train_stats.sd + train_stats.mean
    Z[0] = x
    return Z


def proximity_weights(instance, samples, width: float, scale=None) -> np.ndarray:
    """
    w_i = exp(-||instance - sample_i||^2 / width^2)，距离在标准化坐标下计算
    :param scale: 每个特征的缩放尺度，None 表示输入已经是标准化坐标
    """
    if not width > 0:
        raise ArgumentError(f"核宽度必须大于 0: {width}")
    x = np.asarray(instance, dtype=np.float64).ravel()
    Z = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if Z.shape[1] != x.shape[0]:
        raise ArgumentError(f"维度不匹配: 记录 {x.shape[0]} 维, 样本 {Z.shape[1]} 维")
    diff = Z - x
    if scale is not None:
        diff = diff / np.asarray(scale, dtype=np.float64)
    d2 = np.einsum("ij,ij->i", diff, diff)
    w = np.exp(-d2 / (width * width))
    # 距离很远时 exp 会下溢为 0，保持权重严格为正
    return np.maximum(w, np.finfo(np.float64).tiny)


def _weighted_ridge(Z: np.ndarray, t: np.ndarray, w: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """
    min sum_i w_i (t_i - b0 - z_i.b)^2 + lam ||b||^2
    按加权均值中心化后截距可以单独求出，剩下的部分用增广最小二乘解
    """
    w_sum = w.sum()
    z_bar = (w @ Z) / w_sum
    t_bar = float(w @ t) / w_sum
    sw = np.sqrt(w)
    A = sw[:, None] * (Z - z_bar)
    b = sw * (t - t_bar)
    d = Z.shape[1]
    if lam > 0:
        A = np.vstack([A, math.sqrt(lam) * np.eye(d)])
        b = np.concatenate([b, np.zeros(d)])
    coef, _, _, _ = lstsq(A, b, lapack_driver="gelsd")
    coef = np.asarray(coef, dtype=np.float64)
    return coef, t_bar - float(z_bar @ coef)


def fit_local_model(samples, targets, weights, p: LimeParams) -> tuple[tuple[int, ...], np.ndarray, float]:
    """
    先在全部特征上做一次加权岭回归，按 |系数 * 加权标准差| 取前 k 个特征，
    再只用这 k 个特征重新拟合
    :return: (按编号升序的特征, 对应系数, 截距)
    """
    Z = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    t = np.asarray(targets, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if not (Z.shape[0] == t.shape[0] == w.shape[0]):
        raise ArgumentError(f"样本 {Z.shape[0]} 行, 目标 {t.shape[0]} 个, 权重 {w.shape[0]} 个，长度不一致")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ArgumentError("权重必须是非负有限数")
    if not w.sum() > 0:
        raise DegenerateWeightsError("所有样本权重都为 0，无法拟合局部模型")

    d = Z.shape[1]
    k = p.k_for(d)
    if k < d:
        full_coef, _ = _weighted_ridge(Z, t, w, p.ridge_lambda)
        z_bar = (w @ Z) / w.sum()
        w_sd = np.sqrt((w @ (Z - z_bar) ** 2) / w.sum())
        score = np.abs(full_coef * w_sd)
        top = np.argsort(-score, kind="stable")[:k]
        selected = tuple(int(j) for j in np.sort(top))
    else:
        selected = tuple(range(d))

    coef, intercept = _weighted_ridge(Z[:, list(selected)], t, w, p.ridge_lambda)
    return selected, coef, intercept


def explain_instance(instance, model: SvrModel, train_stats: TrainStats, p: Optional[LimeParams] = None,
                     seed: Optional[int] = None, index: int = -1) -> Explanation:
    """
    perturb -> predict_svr -> proximity_weights -> fit_local_model
    :param seed: 覆盖 p.seed，explain_many 用它给每条记录单独派生种子
    """
    p = p or LimeParams()
    x = np.asarray(instance, dtype=np.float64).ravel()
    if x.shape[0] != model.n_features:
        raise ArgumentError(f"维度不匹配: 模型 {model.n_features} 维, 记录 {x.shape[0]} 维")
    seed = p.seed if seed is None else seed

    Z = perturb(x, train_stats, p.n_samples, seed)
    targets = predict_svr(model, Z)
    w = proximity_weights(x, Z, p.width_for(x.shape[0]), train_stats.distance_scale())
    selected, coef, intercept = fit_local_model(Z, targets, w, p)

    local = float(intercept + np.dot(coef, x[list(selected)]))
    return Explanation(
        instance=x.copy(),
        selected_features=selected,
        weights=coef,
        intercept=float(intercept),
        local_prediction=local,
        blackbox_prediction=float(targets[0]),
        index=index,
        seed=seed,
    )


def derive_seed(seed: int, index: int) -> int:
    """
    由 (运行种子, 记录编号) 派生每条记录的种子，与执行顺序无关
    """
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def explain_many(X, model: SvrModel, train_stats: TrainStats, p: Optional[LimeParams] = None,
                 progress_callback: Optional[Callable[[int, int], None]] = None) -> list[Explanation]:
    """
    逐条解释测试集的每一行
    :param progress_callback: 进度回调 (当前索引, 总数)
    """
    p = p or LimeParams()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    total = X.shape[0]
    out = []
    for i in range(total):
        if progress_callback:
            progress_callback(i, total)
        out.append(explain_instance(X[i], model, train_stats, p, seed=derive_seed(p.seed, i), index=i))
    logger.debug("LIME 完成 %d 条记录的解释", total)
    return out


def local_predictions(explanations: Sequence[Explanation]) -> np.ndarray:
    return np.array([e.local_prediction for e in explanations], dtype=np.float64)
