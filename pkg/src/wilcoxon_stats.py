"""
配对 Wilcoxon 符号秩检验 (双侧)
零差值丢弃、绝对差取平均秩；n <= 25 且无并列时用精确分布，否则用带并列修正和连续性修正的正态近似
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

from errors import ArgumentError, DegenerateDataError

EXACT = "exact"
NORMAL = "normal-approximation"
EXACT_MAX_N = 25


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    v_statistic: float
    p_two_sided: float
    method: str

    def to_dict(self) -> dict:
        return {
            "n_effective": self.n_effective,
            "v_statistic": self.v_statistic,
            "p_two_sided": self.p_two_sided,
            "method": self.method,
        }


def signed_rank_counts(n: int) -> np.ndarray:
    """
    counts[s] = 秩 1..n 上正秩和恰为 s 的符号组合数，长度 n(n+1)/2 + 1
    逐个加入秩 k: 要么不取 (和不变)，要么取 (和 + k)
    """
    if n < 0:
        raise ArgumentError(f"n 不能为负: {n}")
    counts = np.zeros(n * (n + 1) // 2 + 1, dtype=np.int64)
    counts[0] = 1
    top = 0
    for k in range(1, n + 1):
        counts[k:top + k + 1] += counts[:top + 1].copy()
        top += k
    return counts


def _exact_p(v: int, n: int) -> float:
    counts = signed_rank_counts(n)
    le = int(counts[:v + 1].sum())
    ge = int(counts[v:].sum())
    return min(1.0, 2.0 * min(le, ge) / 2 ** n)


def _normal_p(v: float, ranks: np.ndarray) -> float:
    n = ranks.shape[0]
    z = v - n * (n + 1) / 4.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48.0
    sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0 - tie_term)
    if sigma == 0:
        return 1.0
    correction = 0.5 * np.sign(z)
    z = (z - correction) / sigma
    return min(1.0, 2.0 * float(min(norm.cdf(z), norm.sf(z))))


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """
    d_i = a_i - b_i，V = 正差值的秩和
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape[0] != b.shape[0]:
        raise ArgumentError(f"配对样本长度不一致: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 1:
        raise ArgumentError("配对样本为空")

    d = a - b
    d = d[d != 0]
    n = int(d.shape[0])
    if n == 0:
        raise DegenerateDataError("所有配对差值都为 0，无法做符号秩检验")

    ranks = rankdata(np.abs(d), method="average")
    v = float(ranks[d > 0].sum())
    has_ties = np.unique(ranks).shape[0] < n

    if n <= EXACT_MAX_N and not has_ties:
        p = _exact_p(int(round(v)), n)
        method = EXACT
    else:
        p = _normal_p(v, ranks)
        method = NORMAL
    p = max(p, np.finfo(np.float64).tiny)
    return WilcoxonResult(n_effective=n, v_statistic=v, p_two_sided=p, method=method)


def significance(r: WilcoxonResult, alpha: float = 0.05) -> bool:
    if not 0 < alpha < 1:
        raise ArgumentError(f"alpha 必须在 (0, 1) 之间: {alpha}")
    return r.p_two_sided < alpha


def format_result(r: WilcoxonResult, alpha: float = 0.05) -> str:
    verdict = "yes" if significance(r, alpha) else "no"
    v = f"{r.v_statistic:g}"
    return f"V={v}, p={r.p_two_sided:.4g}, method={r.method}, significant at {alpha:g}: {verdict}"
