"""
epsilon-SVR 黑盒模型

对偶问题按 libsvm 的写法展开成 2n 个变量:
    min  1/2 a^T Q a + p^T a
    s.t. y^T a = 0, 0 <= a_t <= C
前 n 个变量是 alpha_i (y_t=+1, p_t = eps - y_i)，后 n 个是 alpha*_i (y_t=-1, p_t = eps + y_i)，
Q_st = y_s y_t K(x_s, x_t)。用 SMO (二阶工作集选择 + 两变量解析子问题) 求解。
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from errors import ArgumentError, ConvergenceError

logger = logging.getLogger(__name__)

TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """
    :param kind: 'rbf' 或 'linear'
    :param gamma: rbf 宽度参数；None 表示拟合时取 1/d
    """
    kind: str = "rbf"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ArgumentError(f"不支持的核函数: {self.kind}")
        if self.kind == "rbf" and self.gamma is not None and not self.gamma > 0:
            raise ArgumentError(f"rbf 核的 gamma 必须大于 0: {self.gamma}")

    def resolve(self, n_features: int) -> "KernelSpec":
        if self.kind == "rbf" and self.gamma is None:
            return KernelSpec("rbf", 1.0 / max(n_features, 1))
        return self


@dataclass(frozen=True)
class SvrParams:
    C: float = 1.0
    epsilon: float = 0.1
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tol: float = 1e-3
    max_iter: int = 1_000_000

    def __post_init__(self):
        if not self.C > 0:
            raise ArgumentError(f"C 必须大于 0: {self.C}")
        if not self.epsilon >= 0:
            raise ArgumentError(f"epsilon 不能为负: {self.epsilon}")
        if not self.tol > 0:
            raise ArgumentError(f"tol 必须大于 0: {self.tol}")
        if self.max_iter < 1:
            raise ArgumentError(f"max_iter 至少为 1: {self.max_iter}")


@dataclass(frozen=True, eq=False)
class SvrModel:
    """
    f(x) = sum_i beta_i K(sv_i, x) + bias，beta_i = alpha_i - alpha*_i
    """
    support_vectors: np.ndarray
    beta: np.ndarray
    bias: float
    kernel: KernelSpec
    n_features: int
    dual_objective: float = 0.0
    kkt_violation: float = 0.0
    n_iter: int = 0
    C: float = 1.0
    support_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))

    @property
    def n_support(self) -> int:
        return int(self.beta.shape[0])


def _check_dims(u: np.ndarray, v: np.ndarray):
    if u.shape[-1] != v.shape[-1]:
        raise ArgumentError(f"维度不匹配: {u.shape[-1]} vs {v.shape[-1]}")


def kernel_eval(k: KernelSpec, u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    _check_dims(u, v)
    if k.kind == "linear":
        return float(np.dot(u, v))
    gamma = k.resolve(u.shape[0]).gamma
    diff = u - v
    return float(np.exp(-gamma * np.dot(diff, diff)))


def kernel_matrix(k: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    _check_dims(A, B)
    if k.kind == "linear":
        return A @ B.T
    gamma = k.resolve(A.shape[1]).gamma
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


def _max_violating_pair(alpha, G, sign, C, K_diag, K, n, idx):
    """
    libsvm 的二阶工作集选择，返回 (i, j, Gmax - Gmin)；j 为 -1 表示已经最优
    """
    minus_yG = -sign * G
    up = ((sign > 0) & (alpha < C)) | ((sign < 0) & (alpha > 0))
    low = ((sign > 0) & (alpha > 0)) | ((sign < 0) & (alpha < C))
    if not up.any() or not low.any():
        return -1, -1, 0.0

    cand_up = np.where(up, minus_yG, -np.inf)
    i = int(np.argmax(cand_up))
    g_max = cand_up[i]
    g_min = np.min(np.where(low, minus_yG, np.inf))
    gap = float(g_max - g_min)

    ii = i % n
    b = g_max - minus_yG
    mask = low & (b > 0)
    if not mask.any():
        return i, -1, gap
    a = K_diag[ii] + K_diag[idx] - 2.0 * K[ii, idx]
    a = np.where(a > 0, a, TAU)
    score = np.where(mask, -(b * b) / a, np.inf)
    j = int(np.argmin(score))
    return i, j, gap


def fit_svr(X, y, p: Optional[SvrParams] = None) -> SvrModel:
    """
    训练 epsilon-SVR
    :param X: n x d 特征矩阵
    :param y: 长度 n 的目标
    :param p: 超参数，默认 C=1, eps=0.1, rbf 核 gamma=1/d
    """
    p = p or SvrParams()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n, d = X.shape
    if n < 1:
        raise ArgumentError("训练集为空")
    if y.shape[0] != n:
        raise ArgumentError(f"X 行数 {n} 与 y 长度 {y.shape[0]} 不一致")

    kernel = p.kernel.resolve(d)
    C = float(p.C)
    K = kernel_matrix(kernel, X, X)
    K_diag = np.diag(K).copy()

    sign = np.concatenate([np.ones(n), -np.ones(n)])
    lin = np.concatenate([p.epsilon - y, p.epsilon + y])
    alpha = np.zeros(2 * n)
    G = lin.copy()
    idx = np.arange(2 * n) % n

    def q_column(t: int) -> np.ndarray:
        col = K[:, t % n]
        return sign[t] * sign * np.concatenate([col, col])

    n_iter = 0
    gap = np.inf
    while True:
        i, j, gap = _max_violating_pair(alpha, G, sign, C, K_diag, K, n, idx)
        if j < 0 or gap < p.tol:
            break
        if n_iter >= p.max_iter:
            raise ConvergenceError(
                f"SVR 在 {n_iter} 次迭代后未收敛，KKT 违反量 {gap:.3e}", violation=gap, n_iter=n_iter
            )
        n_iter += 1

        Qi = q_column(i)
        Qj = q_column(j)
        Q_ii, Q_jj, Q_ij = Qi[i], Qj[j], Qi[j]
        old_i, old_j = alpha[i], alpha[j]

        if sign[i] != sign[j]:
            quad = Q_ii + Q_jj + 2.0 * Q_ij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q_ii + Q_jj - 2.0 * Q_ij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        alpha[i] = min(max(alpha[i], 0.0), C)
        alpha[j] = min(max(alpha[j], 0.0), C)
        G += Qi * (alpha[i] - old_i) + Qj * (alpha[j] - old_j)

    # 偏置: 自由变量的 y*G 平均；没有自由变量时取上下界中点
    yG = sign * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(np.mean(yG[free]))
    else:
        ub_mask = (at_upper & (sign < 0)) | (at_lower & (sign > 0))
        lb_mask = (at_upper & (sign > 0)) | (at_lower & (sign < 0))
        ub = float(np.min(yG[ub_mask])) if ub_mask.any() else np.inf
        lb = float(np.max(yG[lb_mask])) if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0

    objective = float(np.dot(alpha, G + lin) / 2.0)
    beta = alpha[:n] - alpha[n:]
    keep = beta != 0
    model = SvrModel(
        support_vectors=X[keep].copy(),
        beta=beta[keep].copy(),
        bias=-rho,
        kernel=kernel,
        n_features=d,
        dual_objective=objective,
        kkt_violation=float(max(gap, 0.0)) if np.isfinite(gap) else 0.0,
        n_iter=n_iter,
        C=C,
        support_index=np.flatnonzero(keep),
    )
    logger.debug("SVR 训练完成: %d 个支持向量, %d 次迭代, 目标函数 %.6g", model.n_support, n_iter, objective)
    return model


def predict_svr(m: SvrModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != m.n_features:
        raise ArgumentError(f"维度不匹配: 模型 {m.n_features} 维, 输入 {X.shape[1]} 维")
    if m.n_support == 0:
        return np.full(X.shape[0], m.bias)
    return kernel_matrix(m.kernel, X, m.support_vectors) @ m.beta + m.bias


def save_model(m: SvrModel, path: str):
    """
    审计用的 JSON 导出 (格式不保证跨版本稳定)
    """
    data = {
        "kernel": {"kind": m.kernel.kind, "gamma": m.kernel.gamma},
        "bias": m.bias,
        "C": m.C,
        "n_features": m.n_features,
        "dual_objective": m.dual_objective,
        "kkt_violation": m.kkt_violation,
        "n_iter": m.n_iter,
        "beta": m.beta.tolist(),
        "support_vectors": m.support_vectors.tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=4, ensure_ascii=False)


def load_model(path: str) -> SvrModel:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    n_features = int(data["n_features"])
    sv = np.asarray(data["support_vectors"], dtype=np.float64).reshape(-1, n_features)
    return SvrModel(
        support_vectors=sv,
        beta=np.asarray(data["beta"], dtype=np.float64),
        bias=float(data["bias"]),
        kernel=KernelSpec(data["kernel"]["kind"], data["kernel"]["gamma"]),
        n_features=n_features,
        dual_objective=float(data.get("dual_objective", 0.0)),
        kkt_violation=float(data.get("kkt_violation", 0.0)),
        n_iter=int(data.get("n_iter", 0)),
        C=float(data.get("C", 1.0)),
    )
