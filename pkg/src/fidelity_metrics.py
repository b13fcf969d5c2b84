"""
解释器对黑盒的拟合程度
- 全局: 三种解释器在测试集上相对参考值的 RMSE (table2.csv 的三列)
- 局部: 逐条比较平方误差，统计树/线性回归胜过 LIME 的记录数 (table3.csv)
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from errors import ArgumentError

TIES_INCLUDE = "include"
TIES_STRICT = "strict"


def _vector(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).ravel()
    if a.size == 0:
        raise ArgumentError(f"{name} 为空")
    return a


def _same_length(**vectors) -> list[np.ndarray]:
    arrays = [_vector(v, k) for k, v in vectors.items()]
    lengths = {a.shape[0] for a in arrays}
    if len(lengths) != 1:
        detail = ", ".join(f"{k}={a.shape[0]}" for k, a in zip(vectors, arrays))
        raise ArgumentError(f"向量长度不一致: {detail}")
    return arrays


def _check_ties(ties: str):
    if ties not in (TIES_INCLUDE, TIES_STRICT):
        raise ArgumentError(f"ties 只能是 {TIES_INCLUDE} 或 {TIES_STRICT}: {ties}")


def rmse(pred, ref) -> float:
    pred, ref = _same_length(pred=pred, ref=ref)
    r = pred - ref
    return math.sqrt(float(np.dot(r, r)) / r.shape[0])


@dataclass(frozen=True)
class FidelityReport:
    rmse_mlr: float
    rmse_tree: float
    rmse_lime: float

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not (math.isfinite(v) and v >= 0):
                raise ArgumentError(f"{name} 必须是非负有限数: {v}")

    def to_dict(self) -> dict:
        return asdict(self)


def global_fidelity(svr_test_preds, tree_preds, lin_preds, lime_preds) -> FidelityReport:
    """
    三种解释器相对同一参考向量的 RMSE
    参考向量默认是黑盒在测试集上的预测；以真实值为参考时调用方直接传 y_test
    """
    ref, tree, lin, lime = _same_length(
        svr_test_preds=svr_test_preds, tree_preds=tree_preds, lin_preds=lin_preds, lime_preds=lime_preds
    )
    return FidelityReport(rmse_mlr=rmse(lin, ref), rmse_tree=rmse(tree, ref), rmse_lime=rmse(lime, ref))


@dataclass(frozen=True)
class LocalWinCounts:
    x1: int
    x2: int
    T: int

    def __post_init__(self):
        if self.T < 1:
            raise ArgumentError(f"记录总数 T 至少为 1: {self.T}")
        for name, x in (("x1", self.x1), ("x2", self.x2)):
            if not 0 <= x <= self.T:
                raise ArgumentError(f"{name}={x} 超出范围 [0, {self.T}]")

    @property
    def pct1(self) -> float:
        return self.x1 / self.T * 100

    @property
    def pct2(self) -> float:
        return self.x2 / self.T * 100

    def to_dict(self) -> dict:
        return {"x1": self.x1, "x2": self.x2, "T": self.T, "pct1": self.pct1, "pct2": self.pct2}


def local_win_counts(tree_preds, lin_preds, lime_preds, svr_preds, ties: str = TIES_INCLUDE) -> LocalWinCounts:
    """
    逐条记录比较平方误差 e_m(i) = (m_i - svr_i)^2
    x1: 树的误差不超过 LIME 的记录数；x2: 线性回归的误差不超过 LIME 的记录数
    ties='strict' 时平局不计入
    """
    _check_ties(ties)
    tree, lin, lime, svr = _same_length(
        tree_preds=tree_preds, lin_preds=lin_preds, lime_preds=lime_preds, svr_preds=svr_preds
    )
    e_tree = (tree - svr) ** 2
    e_lin = (lin - svr) ** 2
    e_lime = (lime - svr) ** 2
    if ties == TIES_INCLUDE:
        x1 = int(np.count_nonzero(e_tree <= e_lime))
        x2 = int(np.count_nonzero(e_lin <= e_lime))
    else:
        x1 = int(np.count_nonzero(e_tree < e_lime))
        x2 = int(np.count_nonzero(e_lin < e_lime))
    return LocalWinCounts(x1=x1, x2=x2, T=int(svr.shape[0]))


def round_half_up(x: float, digits: int = 0) -> float:
    """
    四舍五入 (不用 Python 的银行家舍入)
    """
    factor = 10 ** digits
    return math.floor(x * factor + 0.5) / factor


@dataclass(frozen=True)
class WinRates:
    n_runs: int
    tree_lt_lime: int
    mlr_lt_lime: int
    tree_lt_mlr: int

    @staticmethod
    def _pct(count: int, total: int) -> int:
        return int(round_half_up(count / total * 100))

    @property
    def pct_tree_lt_lime(self) -> int:
        return self._pct(self.tree_lt_lime, self.n_runs)

    @property
    def pct_mlr_lt_lime(self) -> int:
        return self._pct(self.mlr_lt_lime, self.n_runs)

    @property
    def pct_tree_lt_mlr(self) -> int:
        return self._pct(self.tree_lt_mlr, self.n_runs)

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "tree_lt_lime": self.tree_lt_lime,
            "mlr_lt_lime": self.mlr_lt_lime,
            "tree_lt_mlr": self.tree_lt_mlr,
            "pct_tree_lt_lime": self.pct_tree_lt_lime,
            "pct_mlr_lt_lime": self.pct_mlr_lt_lime,
            "pct_tree_lt_mlr": self.pct_tree_lt_mlr,
        }


def win_rate(rows: Sequence[FidelityReport]) -> WinRates:
    """
    按运行统计严格小于的次数，百分比四舍五入到整数
    """
    rows = list(rows)
    if not rows:
        raise ArgumentError("win_rate 至少需要一行结果")
    return WinRates(
        n_runs=len(rows),
        tree_lt_lime=sum(1 for r in rows if r.rmse_tree < r.rmse_lime),
        mlr_lt_lime=sum(1 for r in rows if r.rmse_mlr < r.rmse_lime),
        tree_lt_mlr=sum(1 for r in rows if r.rmse_tree < r.rmse_mlr),
    )


def local_preference_rate(rows: Sequence[LocalWinCounts], ties: str = TIES_INCLUDE) -> tuple[int, int, int]:
    """
    pct1 >= pct2 (树在局部比线性回归更常胜过 LIME) 的运行数
    :return: (满足条件的运行数, 总运行数, 四舍五入后的百分比)
    """
    _check_ties(ties)
    rows = list(rows)
    if not rows:
        raise ArgumentError("local_preference_rate 至少需要一行结果")
    # 同一个 T 下比较计数，避免百分比的浮点误差
    if ties == TIES_INCLUDE:
        count = sum(1 for r in rows if r.x1 >= r.x2)
    else:
        count = sum(1 for r in rows if r.x1 > r.x2)
    return count, len(rows), int(round_half_up(count / len(rows) * 100))
