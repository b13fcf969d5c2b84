"""
实验流程: 单次运行 (run_one)、整套运行 (run_suite)、直接用发布的结果表回放统计 (replay_tables)、
以及单条测试记录的对照解释 (explain_row)
"""
from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from data_loader import DataLoader, Dataset, select_features, split, standardize
from dataset_schemas import get_schema
from errors import ArgumentError, DegenerateDataError, StageError, TableFormatError
from fidelity_metrics import (
    TIES_INCLUDE,
    TIES_STRICT,
    FidelityReport,
    LocalWinCounts,
    WinRates,
    global_fidelity,
    local_preference_rate,
    local_win_counts,
    rmse,
    round_half_up,
    win_rate,
)
from lime_explainer import (
    Explanation,
    LimeParams,
    TrainStats,
    derive_seed,
    explain_instance,
    explain_many,
    local_predictions,
)
from reporting import TABLE2_COLUMNS, TABLE3_COLUMNS
from surrogates import (
    LinModel,
    Rule,
    TreeModel,
    TreeParams,
    decision_path,
    extract_rules,
    fit_ols,
    fit_tree,
    lin_contributions,
    predict_lin,
    predict_tree,
)
from svr_model import SvrModel, SvrParams, fit_svr, predict_svr
from wilcoxon_stats import WilcoxonResult, significance, wilcoxon_signed_rank

logger = logging.getLogger(__name__)

REFERENCE_BLACKBOX = "blackbox"
REFERENCE_TRUTH = "truth"

STAGES = (
    "load", "select_features", "split", "standardize", "direct_fit",
    "blackbox_predict", "surrogate_fit", "lime", "fidelity",
)


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    n_features: int
    seed: int = 0
    svr: SvrParams = field(default_factory=SvrParams)
    tree: TreeParams = field(default_factory=TreeParams)
    lime: LimeParams = field(default_factory=LimeParams)
    test_fraction: float = 0.2
    fidelity_reference: str = REFERENCE_BLACKBOX
    ties: str = TIES_INCLUDE
    standardize: bool = True

    def __post_init__(self):
        if self.n_features < 1:
            raise ArgumentError(f"特征数至少为 1: {self.n_features}")
        if self.seed < 0:
            raise ArgumentError(f"seed 不能为负: {self.seed}")
        if self.fidelity_reference not in (REFERENCE_BLACKBOX, REFERENCE_TRUTH):
            raise ArgumentError(f"fidelity_reference 只能是 blackbox 或 truth: {self.fidelity_reference}")
        if self.ties not in (TIES_INCLUDE, TIES_STRICT):
            raise ArgumentError(f"ties 只能是 include 或 strict: {self.ties}")

    def stage_seeds(self) -> tuple[int, int, int]:
        """
        特征抽样、训练/测试划分、LIME 各用一个由 seed 派生的独立种子
        """
        s = np.random.SeedSequence(self.seed).generate_state(3)
        return int(s[0]), int(s[1]), int(s[2])

    def label(self) -> str:
        return f"{self.dataset}:{self.n_features}:{self.seed}"


@dataclass(frozen=True, eq=False)
class RunRecord:
    config: RunConfig
    title: str
    direct_rmse_mlr: float
    direct_rmse_svr: float
    gate_passed: bool
    fidelity: FidelityReport
    local: LocalWinCounts
    n_train: int = 0
    columns: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()
    explanations: tuple[Explanation, ...] = field(default=(), repr=False)
    tree: Optional[TreeModel] = field(default=None, repr=False)
    svr: Optional[SvrModel] = field(default=None, repr=False)

    def to_row(self) -> dict:
        c = self.config
        return {
            "dataset": c.dataset,
            "title": self.title,
            "n_features": c.n_features,
            "seed": c.seed,
            "n_train": self.n_train,
            "n_test": self.local.T,
            "features": ";".join(self.columns),
            "direct_rmse_mlr": self.direct_rmse_mlr,
            "direct_rmse_svr": self.direct_rmse_svr,
            "gate_passed": self.gate_passed,
            "fidelity_reference": c.fidelity_reference,
            "ties": c.ties,
            "rmse_mlr": self.fidelity.rmse_mlr,
            "rmse_tree": self.fidelity.rmse_tree,
            "rmse_lime": self.fidelity.rmse_lime,
            "x1": self.local.x1,
            "x2": self.local.x2,
            "T": self.local.T,
            "pct1": self.local.pct1,
            "pct2": self.local.pct2,
        }


@dataclass(frozen=True)
class Comparison:
    name: str
    description: str
    result: Optional[WilcoxonResult] = None
    error: Optional[str] = None
    alpha: float = 0.05

    @property
    def significant(self) -> Optional[bool]:
        return None if self.result is None else significance(self.result, self.alpha)


@dataclass(eq=False)
class SuiteSummary:
    titles: list[str]
    n_features: list[int]
    fidelity: list[FidelityReport]
    local: list[LocalWinCounts]
    win_rates: WinRates
    comparisons: dict[str, Comparison]
    preference: tuple[int, int, int]
    preference_strict: tuple[int, int, int]
    alpha: float = 0.05
    records: list[RunRecord] = field(default_factory=list)
    mismatches: list[str] = field(default_factory=list)
    # (运行标签, 失败原因)，不计入统计
    failed_runs: list[tuple[str, str]] = field(default_factory=list)

    @property
    def n_runs(self) -> int:
        return len(self.fidelity)


@dataclass(eq=False)
class RunArtifacts:
    """
    一次运行的中间结果，explain_row 和测试会用到
    """
    train: Dataset
    test: Dataset
    svr: SvrModel
    direct_lin: LinModel
    tree: TreeModel
    lin: LinModel
    train_stats: TrainStats
    lime: LimeParams
    svr_test: np.ndarray
    notes: tuple[str, ...] = ()
    scaling: object = None


@contextmanager
def _stage(name: str, label: str):
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        logger.error("[%s] 步骤 %s 失败: %s", label, name, e)
        raise StageError(name, e) from e


def _fit_models(c: RunConfig, loader: DataLoader) -> RunArtifacts:
    label = c.label()
    feature_seed, split_seed, lime_seed = c.stage_seeds()

    with _stage("load", label):
        data = loader.load(c.dataset)
    with _stage("select_features", label):
        data = select_features(data, c.n_features, feature_seed)
    with _stage("split", label):
        pair = split(data, c.test_fraction, split_seed)
    train, test, scaling = pair.train, pair.test, None
    if c.standardize:
        with _stage("standardize", label):
            train, test, scaling = standardize(train, test)

    with _stage("direct_fit", label):
        direct_lin = fit_ols(train.X, train.y)
        svr = fit_svr(train.X, train.y, c.svr)
    with _stage("blackbox_predict", label):
        svr_train = predict_svr(svr, train.X)
        svr_test = predict_svr(svr, test.X)
    with _stage("surrogate_fit", label):
        tree = fit_tree(train.X, svr_train, c.tree)
        lin = fit_ols(train.X, svr_train)

    return RunArtifacts(
        train=train,
        test=test,
        svr=svr,
        direct_lin=direct_lin,
        tree=tree,
        lin=lin,
        train_stats=TrainStats.from_matrix(train.X),
        lime=replace(c.lime, seed=lime_seed),
        svr_test=svr_test,
        notes=data.notes,
        scaling=scaling,
    )


def run_one(c: RunConfig, loader: Optional[DataLoader] = None) -> RunRecord:
    """
    load -> select_features -> split -> standardize -> 直接拟合 MLR/SVR (有效性检查)
    -> 黑盒预测 -> 拟合树和线性代理 -> 逐条 LIME -> 全局/局部拟合度
    """
    loader = loader or DataLoader()
    label = c.label()
    art = _fit_models(c, loader)
    train, test = art.train, art.test

    direct_rmse_mlr = rmse(predict_lin(art.direct_lin, test.X), test.y)
    direct_rmse_svr = rmse(art.svr_test, test.y)
    gate_passed = direct_rmse_mlr > direct_rmse_svr
    if not gate_passed:
        logger.warning("[%s] 有效性检查未通过: 线性回归 RMSE %.4g 不大于 SVR RMSE %.4g",
                       label, direct_rmse_mlr, direct_rmse_svr)

    with _stage("lime", label):
        explanations = explain_many(test.X, art.svr, art.train_stats, art.lime)
    with _stage("fidelity", label):
        tree_test = predict_tree(art.tree, test.X)
        lin_test = predict_lin(art.lin, test.X)
        lime_test = local_predictions(explanations)
        ref = art.svr_test if c.fidelity_reference == REFERENCE_BLACKBOX else test.y
        report = global_fidelity(ref, tree_test, lin_test, lime_test)
        local = local_win_counts(tree_test, lin_test, lime_test, art.svr_test, c.ties)

    schema = get_schema(c.dataset, loader.schemas)
    record = RunRecord(
        config=c,
        title=schema.title if schema else c.dataset,
        direct_rmse_mlr=direct_rmse_mlr,
        direct_rmse_svr=direct_rmse_svr,
        gate_passed=gate_passed,
        fidelity=report,
        local=local,
        n_train=train.n_rows,
        columns=train.columns,
        notes=art.notes,
        explanations=tuple(explanations),
        tree=art.tree,
        svr=art.svr,
    )
    logger.info("[%s] RMSE mlr=%.4g tree=%.4g lime=%.4g, x1=%d x2=%d T=%d",
                label, report.rmse_mlr, report.rmse_tree, report.rmse_lime, local.x1, local.x2, local.T)
    return record


def _compare(name: str, description: str, a, b, alpha: float) -> Comparison:
    try:
        return Comparison(name, description, result=wilcoxon_signed_rank(a, b), alpha=alpha)
    except DegenerateDataError as e:
        logger.warning("%s: %s", name, e)
        return Comparison(name, description, error=str(e), alpha=alpha)


def summarize(titles: Sequence[str], n_features: Sequence[int], fidelity: Sequence[FidelityReport],
              local: Sequence[LocalWinCounts], alpha: float = 0.05,
              records: Optional[list[RunRecord]] = None) -> SuiteSummary:
    """
    跨运行的汇总: 胜率、六组配对 Wilcoxon 检验、pct1 >= pct2 的比例
    """
    fidelity = list(fidelity)
    local = list(local)
    if len(fidelity) != len(local) or len(fidelity) != len(titles):
        raise ArgumentError("汇总的各列长度不一致")
    if len(fidelity) < 2:
        raise ArgumentError(f"Wilcoxon 检验至少需要 2 次运行，当前 {len(fidelity)} 次")

    tree = [r.rmse_tree for r in fidelity]
    mlr = [r.rmse_mlr for r in fidelity]
    lime = [r.rmse_lime for r in fidelity]
    pct1 = np.array([r.pct1 for r in local])
    pct2 = np.array([r.pct2 for r in local])

    specs = [
        ("tree_vs_lime", "RMSE: decision tree vs LIME", tree, lime),
        ("mlr_vs_lime", "RMSE: multi-linear regression vs LIME", mlr, lime),
        ("tree_vs_mlr", "RMSE: decision tree vs multi-linear regression", tree, mlr),
        ("pct1_vs_pct2", "local wins: tree over LIME vs MLR over LIME", pct1, pct2),
        ("tree_vs_lime_local", "local wins: tree over LIME vs LIME over tree", pct1, 100 - pct1),
        ("mlr_vs_lime_local", "local wins: MLR over LIME vs LIME over MLR", pct2, 100 - pct2),
    ]
    comparisons = {name: _compare(name, desc, a, b, alpha) for name, desc, a, b in specs}

    return SuiteSummary(
        titles=list(titles),
        n_features=[int(k) for k in n_features],
        fidelity=fidelity,
        local=local,
        win_rates=win_rate(fidelity),
        comparisons=comparisons,
        preference=local_preference_rate(local, TIES_INCLUDE),
        preference_strict=local_preference_rate(local, TIES_STRICT),
        alpha=alpha,
        records=list(records or []),
    )


def run_suite(configs: Sequence[RunConfig], loader: Optional[DataLoader] = None,
              progress_callback: Optional[Callable[[int, int, RunConfig], None]] = None,
              alpha: float = 0.05) -> SuiteSummary:
    """
    依次执行每个运行并汇总；单次运行失败只记录，统计基于完成的运行
    完成的运行不足 2 次时抛出第一个失败运行的 StageError
    :param progress_callback: 进度回调 (当前索引, 总数, 当前配置)
    """
    configs = list(configs)
    if len(configs) < 2:
        raise ArgumentError(f"整套实验至少需要 2 次运行，当前 {len(configs)} 次")
    loader = loader or DataLoader()

    records = []
    errors: list[tuple[str, StageError]] = []
    total = len(configs)
    for i, c in enumerate(configs):
        if progress_callback:
            progress_callback(i, total, c)
        logger.info("运行 %d/%d: %s", i + 1, total, c.label())
        try:
            records.append(run_one(c, loader))
        except StageError as e:
            logger.warning("[%s] 运行失败，跳过: %s", c.label(), e)
            errors.append((c.label(), e))

    if len(records) < 2:
        logger.error("只完成了 %d 次运行，无法汇总", len(records))
        raise errors[0][1]
    if errors:
        logger.warning("%d/%d 次运行失败，统计基于其余 %d 次", len(errors), total, len(records))

    failed = [r.config.label() for r in records if not r.gate_passed]
    if failed:
        logger.warning("%d 次运行未通过有效性检查 (仍计入统计): %s", len(failed), ", ".join(failed))

    summary = summarize(
        titles=[r.title for r in records],
        n_features=[r.config.n_features for r in records],
        fidelity=[r.fidelity for r in records],
        local=[r.local for r in records],
        alpha=alpha,
        records=records,
    )
    summary.failed_runs = [(label, str(e)) for label, e in errors]
    return summary


def _read_table(path: str, expected: Sequence[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise TableFormatError(f"表格文件不存在: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise TableFormatError(f"{path} 无法解析: {e}") from None
    columns = [str(c).strip() for c in df.columns]
    if columns != list(expected):
        raise TableFormatError(f"{path} 的列与约定的布局不一致: {columns}")
    df.columns = list(expected)
    numeric = df[list(expected[1:])].apply(pd.to_numeric, errors="coerce")
    if numeric.isna().any().any():
        raise TableFormatError(f"{path} 中存在非数值或缺失的单元格")
    df[list(expected[1:])] = numeric
    df[expected[0]] = df[expected[0]].astype(str).str.strip()
    return df


def _pct_text(x: float) -> str:
    return f"{round_half_up(x, 2):.2f}"


def replay_tables(table2_csv: str, table3_csv: str, alpha: float = 0.05) -> SuiteSummary:
    """
    不拟合任何模型，直接用发布的两张结果表计算全部统计量
    同时复核表中的百分比列，与 x/T*100 不一致的单元格记入 mismatches
    """
    t2 = _read_table(table2_csv, TABLE2_COLUMNS)
    t3 = _read_table(table3_csv, TABLE3_COLUMNS)
    if len(t2) != len(t3):
        raise TableFormatError(f"两张表的行数不同: {len(t2)} vs {len(t3)}")
    if list(t2[TABLE2_COLUMNS[0]]) != list(t3[TABLE3_COLUMNS[0]]):
        raise TableFormatError("两张表的数据集列不一致")

    try:
        fidelity = [
            FidelityReport(rmse_mlr=float(r[2]), rmse_tree=float(r[3]), rmse_lime=float(r[4]))
            for r in t2.itertuples(index=False)
        ]
        local = []
        for r in t3.itertuples(index=False):
            x1, x2, T = float(r[1]), float(r[2]), float(r[3])
            if not all(v == int(v) for v in (x1, x2, T)):
                raise ArgumentError(f"{r[0]}: 计数必须是整数")
            local.append(LocalWinCounts(x1=int(x1), x2=int(x2), T=int(T)))
    except ArgumentError as e:
        raise TableFormatError(str(e)) from None

    mismatches = []
    for i, (counts, row) in enumerate(zip(local, t3.itertuples(index=False))):
        for label, pct, published in (("x1/T*100", counts.pct1, row[4]), ("x2/T*100", counts.pct2, row[5])):
            if _pct_text(pct) != _pct_text(published):
                mismatches.append(
                    f"第 {i + 1} 行 {row[0]} {label}: 表中为 {float(published):.2f}，重新计算为 {_pct_text(pct)}"
                )
    for m in mismatches:
        logger.warning("百分比复核: %s", m)

    summary = summarize(
        titles=list(t2[TABLE2_COLUMNS[0]]),
        n_features=[int(k) for k in t2[TABLE2_COLUMNS[1]]],
        fidelity=fidelity,
        local=local,
        alpha=alpha,
    )
    summary.mismatches = mismatches
    return summary


def reaggregate(runs_csv: str, alpha: float = 0.05) -> SuiteSummary:
    """
    从 runs.csv 重新汇总，结果应与生成该文件的 run_suite 完全一致
    """
    try:
        df = pd.read_csv(runs_csv, float_precision="round_trip")
    except (FileNotFoundError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise TableFormatError(f"{runs_csv} 无法读取: {e}") from None
    needed = ["title", "n_features", "rmse_mlr", "rmse_tree", "rmse_lime", "x1", "x2", "T"]
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise TableFormatError(f"{runs_csv} 缺少列: {', '.join(missing)}")
    return summarize(
        titles=list(df["title"]),
        n_features=list(df["n_features"]),
        fidelity=[FidelityReport(float(a), float(b), float(c))
                  for a, b, c in zip(df["rmse_mlr"], df["rmse_tree"], df["rmse_lime"])],
        local=[LocalWinCounts(int(a), int(b), int(c)) for a, b, c in zip(df["x1"], df["x2"], df["T"])],
        alpha=alpha,
    )


@dataclass(frozen=True, eq=False)
class InstanceReport:
    config: RunConfig
    row: int
    columns: tuple[str, ...]
    instance: np.ndarray
    raw_instance: np.ndarray
    y_true: float
    svr_prediction: float
    tree_prediction: float
    tree_path: list[int]
    tree_rule: Rule
    tree: TreeModel
    rules: list[Rule]
    mlr_prediction: float
    mlr_intercept: float
    mlr_contributions: np.ndarray
    explanation: Explanation


def explain_row(c: RunConfig, row: int, loader: Optional[DataLoader] = None) -> InstanceReport:
    """
    对测试集第 row 条记录并排给出: 树的规则路径、线性回归的逐特征贡献、LIME 的局部解释
    LIME 使用与 run_one 中同一条记录相同的种子，两边结果一致
    """
    loader = loader or DataLoader()
    art = _fit_models(c, loader)
    test = art.test
    if not 0 <= row < test.n_rows:
        raise ArgumentError(f"测试集共 {test.n_rows} 行，row={row} 越界")

    x = test.X[row]
    with _stage("lime", c.label()):
        explanation = explain_instance(
            x, art.svr, art.train_stats, art.lime, seed=derive_seed(art.lime.seed, row), index=row
        )

    path = decision_path(art.tree, x)
    rules = extract_rules(art.tree, test.columns)
    rule = next(r for r in rules if r.leaf == path[-1])
    raw = art.scaling.inverse_transform(x) if art.scaling is not None else x.copy()
    return InstanceReport(
        config=c,
        row=row,
        columns=test.columns,
        instance=x.copy(),
        raw_instance=np.asarray(raw, dtype=np.float64),
        y_true=float(test.y[row]),
        svr_prediction=float(art.svr_test[row]),
        tree_prediction=float(predict_tree(art.tree, x[None, :])[0]),
        tree_path=path,
        tree_rule=rule,
        tree=art.tree,
        rules=rules,
        mlr_prediction=float(predict_lin(art.lin, x[None, :])[0]),
        mlr_intercept=art.lin.intercept,
        mlr_contributions=lin_contributions(art.lin, x),
        explanation=explanation,
    )
