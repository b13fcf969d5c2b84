"""
全局代理模型: 多元线性回归 (OLS) 与 CART 回归树
两者都拟合在黑盒 SVR 的输出上，用来解释黑盒
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import lstsq

from errors import ArgumentError

logger = logging.getLogger(__name__)


# ---------- 多元线性回归 ----------

@dataclass(frozen=True, eq=False)
class LinModel:
    coefficients: np.ndarray
    intercept: float
    rank_deficient: bool = False

    @property
    def n_features(self) -> int:
        return int(self.coefficients.shape[0])


def fit_ols(X, y) -> LinModel:
    """
    最小二乘拟合 (正交分解，不显式求逆)
    X 秩亏时取最小范数解，并标记 rank_deficient
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n, d = X.shape
    if n < 1 or y.shape[0] != n:
        raise ArgumentError(f"X 行数 {n} 与 y 长度 {y.shape[0]} 不一致")

    # 先中心化，截距不参与最小范数约束
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    coef, _, rank, _ = lstsq(X - x_mean, y - y_mean, lapack_driver="gelsd")
    coef = np.asarray(coef, dtype=np.float64)
    intercept = y_mean - float(np.dot(x_mean, coef))
    rank_deficient = int(rank) < d
    if rank_deficient:
        logger.warning("设计矩阵秩亏 (rank=%d < %d)，使用最小范数解", int(rank), d)
    return LinModel(coefficients=coef, intercept=intercept, rank_deficient=rank_deficient)


def predict_lin(m: LinModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != m.n_features:
        raise ArgumentError(f"维度不匹配: 模型 {m.n_features} 维, 输入 {X.shape[1]} 维")
    return m.intercept + X @ m.coefficients


def lin_contributions(m: LinModel, x) -> np.ndarray:
    """
    单条记录上每个特征的贡献 coef_j * x_j (不含截距)
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    return m.coefficients * x


# ---------- CART 回归树 ----------

@dataclass(frozen=True)
class TreeParams:
    """
    与 rpart 默认值对齐的停止条件
    :param min_split: 节点样本数少于它就不再尝试分裂
    :param min_bucket: 每个叶子至少包含的样本数
    :param max_depth: 最大深度 (根节点深度为 0)
    :param cp: 分裂带来的 SSE 下降占根节点 SSE 的比例低于 cp 时停止
    """
    min_split: int = 20
    min_bucket: int = 7
    max_depth: int = 30
    cp: float = 0.01

    def __post_init__(self):
        if self.min_bucket < 1:
            raise ArgumentError(f"min_bucket 至少为 1: {self.min_bucket}")
        if self.min_bucket > self.min_split:
            raise ArgumentError(f"min_bucket ({self.min_bucket}) 不能大于 min_split ({self.min_split})")
        if self.max_depth < 0:
            raise ArgumentError(f"max_depth 不能为负: {self.max_depth}")
        if self.cp < 0:
            raise ArgumentError(f"cp 不能为负: {self.cp}")


@dataclass
class TreeNode:
    """
    feature 为 -1 时是叶子
    左子树: x[feature] < threshold；右子树: x[feature] >= threshold
    """
    prediction: float
    n_samples: int
    sse: float
    depth: int
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    improvement: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(eq=False)
class TreeModel:
    nodes: list[TreeNode]
    params: TreeParams
    n_features: int

    @property
    def n_leaves(self) -> int:
        return sum(1 for node in self.nodes if node.is_leaf)

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.nodes)


def _sse(y: np.ndarray) -> float:
    if y.size == 0:
        return 0.0
    r = y - y.mean()
    return float(np.dot(r, r))


def _best_split(X: np.ndarray, y: np.ndarray, min_bucket: int) -> Optional[tuple[int, float, float]]:
    """
    在所有特征、所有相邻不同取值的中点上找 SSE 最小的分裂
    返回 (feature, threshold, 子节点 SSE 之和)；平局时取特征编号最小、阈值最小的
    """
    m, d = X.shape
    yc = y - y.mean()
    total = float(yc.sum())
    total_sq = float(np.dot(yc, yc))
    tie_tol = 1e-12 * max(1.0, total_sq)

    best: Optional[tuple[int, float, float]] = None
    k = np.arange(1, m)
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = yc[order]
        s1 = np.cumsum(ys)[:-1]
        s2 = np.cumsum(ys * ys)[:-1]
        left_sse = s2 - s1 * s1 / k
        right_sse = (total_sq - s2) - (total - s1) ** 2 / (m - k)
        children = left_sse + right_sse
        valid = (xs[1:] > xs[:-1]) & (k >= min_bucket) & (m - k >= min_bucket)
        if not valid.any():
            continue
        cand = np.flatnonzero(valid)
        pos = cand[np.argmin(children[cand])]
        value = float(children[pos])
        if best is None or value < best[2] - tie_tol:
            lo, hi = xs[pos], xs[pos + 1]
            threshold = (lo + hi) / 2.0
            if not lo < threshold <= hi:
                threshold = hi
            best = (j, float(threshold), value)
    return best


def fit_tree(X, y, p: Optional[TreeParams] = None) -> TreeModel:
    """
    贪心 CART: 每个节点选使子节点 SSE 之和最小的 (特征, 阈值)
    """
    p = p or TreeParams()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n, d = X.shape
    if n < 1 or y.shape[0] != n:
        raise ArgumentError(f"X 行数 {n} 与 y 长度 {y.shape[0]} 不一致")

    root_sse = _sse(y)
    nodes: list[TreeNode] = []
    # (父节点, 左/右, 行号, 深度)；节点在出栈时才编号，编号即先序
    stack: list[tuple[int, str, np.ndarray, int]] = [(-1, "", np.arange(n), 0)]
    while stack:
        parent, side, rows, depth = stack.pop()
        ys = y[rows]
        node = TreeNode(prediction=float(ys.mean()), n_samples=int(rows.size), sse=_sse(ys), depth=depth)
        nodes.append(node)
        node_id = len(nodes) - 1
        if parent >= 0:
            setattr(nodes[parent], side, node_id)

        if rows.size < p.min_split or depth >= p.max_depth or np.ptp(ys) == 0:
            continue
        found = _best_split(X[rows], ys, p.min_bucket)
        if found is None:
            continue
        feature, threshold, children_sse = found
        improvement = node.sse - children_sse
        if improvement <= 0 or improvement < p.cp * root_sse:
            continue

        go_left = X[rows, feature] < threshold
        node.feature = feature
        node.threshold = threshold
        node.improvement = improvement
        stack.append((node_id, "right", rows[~go_left], depth + 1))
        stack.append((node_id, "left", rows[go_left], depth + 1))

    tree = TreeModel(nodes=nodes, params=p, n_features=d)
    logger.debug("回归树: %d 个节点, %d 个叶子, 深度 %d", len(nodes), tree.n_leaves, tree.depth)
    return tree


def _leaf_index(m: TreeModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != m.n_features:
        raise ArgumentError(f"维度不匹配: 模型 {m.n_features} 维, 输入 {X.shape[1]} 维")
    out = np.zeros(X.shape[0], dtype=np.intp)
    for r in range(X.shape[0]):
        k = 0
        while not m.nodes[k].is_leaf:
            node = m.nodes[k]
            k = node.left if X[r, node.feature] < node.threshold else node.right
        out[r] = k
    return out


def predict_tree(m: TreeModel, X) -> np.ndarray:
    leaves = _leaf_index(m, X)
    values = np.array([node.prediction for node in m.nodes])
    return values[leaves]


def decision_path(m: TreeModel, x) -> list[int]:
    """
    返回从根到叶子经过的节点编号
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != m.n_features:
        raise ArgumentError(f"维度不匹配: 模型 {m.n_features} 维, 输入 {x.shape[0]} 维")
    path = [0]
    k = 0
    while not m.nodes[k].is_leaf:
        node = m.nodes[k]
        k = node.left if x[node.feature] < node.threshold else node.right
        path.append(k)
    return path


def tree_sse(m: TreeModel, X, y) -> float:
    r = np.asarray(y, dtype=np.float64).ravel() - predict_tree(m, X)
    return float(np.dot(r, r))


# ---------- 规则与特征重要性 ----------

@dataclass(frozen=True)
class Conjunct:
    feature: str
    comparator: str
    threshold: float

    def holds(self, value: float) -> bool:
        return value < self.threshold if self.comparator == "<" else value >= self.threshold


@dataclass(frozen=True)
class Rule:
    conjuncts: tuple[Conjunct, ...]
    prediction: float
    leaf: int = -1
    n_samples: int = 0

    def matches(self, x, names: Sequence[str]) -> bool:
        position = {name: i for i, name in enumerate(names)}
        return all(c.holds(float(x[position[c.feature]])) for c in self.conjuncts)

    def to_text(self, digits: int = 4) -> str:
        if not self.conjuncts:
            cond = "TRUE"
        else:
            cond = " AND ".join(f"{c.feature} {c.comparator} {c.threshold:.{digits}g}" for c in self.conjuncts)
        return f"IF {cond} THEN predict = {self.prediction:.{digits}g}"


def extract_rules(m: TreeModel, names: Sequence[str]) -> list[Rule]:
    """
    每个叶子一条规则，条件顺序与根到叶子的路径一致
    """
    names = list(names)
    if len(names) != m.n_features:
        raise ArgumentError(f"特征名数量 {len(names)} 与模型维度 {m.n_features} 不一致")
    rules: list[Rule] = []
    stack: list[tuple[int, tuple[Conjunct, ...]]] = [(0, ())]
    while stack:
        k, conds = stack.pop()
        node = m.nodes[k]
        if node.is_leaf:
            rules.append(Rule(conjuncts=conds, prediction=node.prediction, leaf=k, n_samples=node.n_samples))
            continue
        name = names[node.feature]
        stack.append((node.right, conds + (Conjunct(name, ">=", node.threshold),)))
        stack.append((node.left, conds + (Conjunct(name, "<", node.threshold),)))
    return rules


def apply_rules(rules: Sequence[Rule], X, names: Sequence[str]) -> np.ndarray:
    """
    用规则集逐行求值；每行恰好命中一条规则
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        hit = [rule for rule in rules if rule.matches(X[r], names)]
        if len(hit) != 1:
            raise ArgumentError(f"第 {r} 行命中了 {len(hit)} 条规则")
        out[r] = hit[0].prediction
    return out


def feature_importance(m: TreeModel) -> np.ndarray:
    """
    每个特征在所有内部节点上带来的 SSE 下降之和，归一化到和为 1；单叶子树返回全 0
    """
    imp = np.zeros(m.n_features)
    for node in m.nodes:
        if not node.is_leaf:
            imp[node.feature] += node.improvement
    total = imp.sum()
    return imp / total if total > 0 else imp
