"""
输出: table2.csv / table3.csv (列名与发布的结果表一致)、runs.csv、summary.csv、report.md、
每次运行的 LIME 解释 CSV、树的特征重要性 CSV 和规则文本，以及 bench explain 的单条记录报告
CSV 中的浮点数保留全精度，Markdown 中按结果表的习惯保留 2~3 位小数
"""
from __future__ import annotations

import logging
import os
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
import pandas as pd

from fidelity_metrics import round_half_up
from surrogates import extract_rules, feature_importance
from svr_model import save_model
from wilcoxon_stats import format_result

if TYPE_CHECKING:
    from experiment import InstanceReport, RunRecord, SuiteSummary
    from lime_explainer import Explanation
    from surrogates import Rule, TreeModel

logger = logging.getLogger(__name__)

TABLE2_COLUMNS = (
    "Dataset",
    "Number of variables used",
    "RMSE using multi-linear regression",
    "RMSE using Decision trees",
    "RMSE using LIME",
)

TABLE3_COLUMNS = (
    "Dataset",
    "Number of test dataset records over which decision trees squared error value is less than of LIME(x1)",
    "Number of test dataset records over which multi-linear regression squared error value is less than of LIME(x2)",
    "Total number of test dataset records(T)",
    "x1/T*100",
    "x2/T*100",
)


def table2_frame(summary: "SuiteSummary") -> pd.DataFrame:
    rows = [
        [title, k, r.rmse_mlr, r.rmse_tree, r.rmse_lime]
        for title, k, r in zip(summary.titles, summary.n_features, summary.fidelity)
    ]
    return pd.DataFrame(rows, columns=list(TABLE2_COLUMNS))


def table3_frame(summary: "SuiteSummary") -> pd.DataFrame:
    rows = [[title, c.x1, c.x2, c.T, c.pct1, c.pct2] for title, c in zip(summary.titles, summary.local)]
    return pd.DataFrame(rows, columns=list(TABLE3_COLUMNS))


def runs_frame(records: Sequence["RunRecord"]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in records])


def summary_frame(summary: "SuiteSummary") -> pd.DataFrame:
    """
    每行一个统计量: 胜率、pct1 >= pct2 比例、六组 Wilcoxon 检验
    """
    w = summary.win_rates
    rows = []
    for name, count, pct in (
        ("tree<lime", w.tree_lt_lime, w.pct_tree_lt_lime),
        ("mlr<lime", w.mlr_lt_lime, w.pct_mlr_lt_lime),
        ("tree<mlr", w.tree_lt_mlr, w.pct_tree_lt_mlr),
    ):
        rows.append({"statistic": f"win_rate {name}", "count": count, "total": w.n_runs, "percent": pct})
    for name, (count, total, pct) in (
        ("pct1>=pct2", summary.preference),
        ("pct1>pct2", summary.preference_strict),
    ):
        rows.append({"statistic": f"preference {name}", "count": count, "total": total, "percent": pct})
    for comp in summary.comparisons.values():
        row = {"statistic": f"wilcoxon {comp.name}", "description": comp.description}
        if comp.result is not None:
            row.update({
                "n_effective": comp.result.n_effective,
                "v_statistic": comp.result.v_statistic,
                "p_two_sided": comp.result.p_two_sided,
                "method": comp.result.method,
                "significant": comp.significant,
            })
        else:
            row["error"] = comp.error
        rows.append(row)
    columns = ["statistic", "count", "total", "percent", "description", "n_effective",
               "v_statistic", "p_two_sided", "method", "significant", "error"]
    return pd.DataFrame(rows, columns=columns)


def explanation_frame(explanations: Sequence["Explanation"], columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    每条测试记录一行: 编号、黑盒预测、LIME 预测、平方误差，然后是 (特征, 权重) 对
    """
    rows = []
    for e in explanations:
        row = {
            "index": e.index,
            "blackbox_prediction": e.blackbox_prediction,
            "local_prediction": e.local_prediction,
            "squared_error": e.squared_error,
            "intercept": e.intercept,
        }
        for i, (name, weight) in enumerate(e.as_pairs(columns), start=1):
            row[f"feature_{i}"] = name
            row[f"weight_{i}"] = weight
        rows.append(row)
    return pd.DataFrame(rows)


def importance_frame(tree: "TreeModel", columns: Sequence[str]) -> pd.DataFrame:
    imp = feature_importance(tree)
    df = pd.DataFrame({"feature": list(columns), "importance": imp})
    return df.sort_values("importance", ascending=False, kind="stable").reset_index(drop=True)


def rules_text(rules: Sequence["Rule"], digits: int = 4) -> str:
    return "\n".join(r.to_text(digits) for r in rules)


def _cell(v, digits: int) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if float(v).is_integer() and abs(v) < 1e15:
            return str(int(v))
        return f"{round_half_up(float(v), digits):.{digits}f}"
    return str(v)


def markdown_table(df: pd.DataFrame, digits: int = 3) -> str:
    header = "| " + " | ".join(str(c) for c in df.columns) + " |"
    sep = "| " + " | ".join("---" for _ in df.columns) + " |"
    body = ["| " + " | ".join(_cell(v, digits) for v in row) + " |" for row in df.itertuples(index=False)]
    return "\n".join([header, sep] + body)


def render_report(summary: "SuiteSummary") -> str:
    w = summary.win_rates
    lines = [
        "# ExplainBench 结果",
        "",
        f"运行次数: {summary.n_runs}",
        "",
        "## 全局拟合度 (RMSE)",
        "",
        markdown_table(table2_frame(summary), digits=3),
        "",
        "## 局部比较",
        "",
        markdown_table(table3_frame(summary), digits=2),
        "",
        "## 胜率",
        "",
        f"- 决策树 RMSE < LIME: {w.tree_lt_lime}/{w.n_runs} ({w.pct_tree_lt_lime}%)",
        f"- 多元线性回归 RMSE < LIME: {w.mlr_lt_lime}/{w.n_runs} ({w.pct_mlr_lt_lime}%)",
        f"- 决策树 RMSE < 多元线性回归: {w.tree_lt_mlr}/{w.n_runs} ({w.pct_tree_lt_mlr}%)",
        f"- pct1 >= pct2 (含平局): {summary.preference[0]}/{summary.preference[1]} ({summary.preference[2]}%)",
        f"- pct1 > pct2 (严格): {summary.preference_strict[0]}/{summary.preference_strict[1]} "
        f"({summary.preference_strict[2]}%)",
        "",
        f"## Wilcoxon 符号秩检验 (alpha = {summary.alpha:g})",
        "",
    ]
    for comp in summary.comparisons.values():
        if comp.result is not None:
            lines.append(f"- {comp.description}: {format_result(comp.result, summary.alpha)}")
        else:
            lines.append(f"- {comp.description}: 无法检验 ({comp.error})")

    if summary.failed_runs:
        lines += ["", "## 失败的运行 (不计入统计)", ""]
        lines += [f"- {label}: {reason}" for label, reason in summary.failed_runs]
    failed = [r for r in summary.records if not r.gate_passed]
    if failed:
        lines += ["", "## 未通过有效性检查的运行", ""]
        for r in failed:
            lines.append(f"- {r.config.label()}: 线性回归 RMSE {r.direct_rmse_mlr:.4g}, SVR RMSE {r.direct_rmse_svr:.4g}")
    if summary.mismatches:
        lines += ["", "## 百分比复核不一致", ""]
        lines += [f"- {m}" for m in summary.mismatches]
    return "\n".join(lines) + "\n"


def write_outputs(summary: "SuiteSummary", out_dir: str, dump_models: bool = False) -> list[str]:
    """
    写出整套实验的全部结果文件，返回写出的路径
    :param dump_models: 同时把每次运行的 SVR 黑盒导出为 models/NN_<数据集>_kK.json
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def save_csv(df: pd.DataFrame, name: str):
        path = os.path.join(out_dir, name)
        df.to_csv(path, index=False, encoding="utf-8")
        written.append(path)

    save_csv(table2_frame(summary), "table2.csv")
    save_csv(table3_frame(summary), "table3.csv")
    if summary.records:
        save_csv(runs_frame(summary.records), "runs.csv")
    save_csv(summary_frame(summary), "summary.csv")

    for i, r in enumerate(summary.records, start=1):
        stem = f"{i:02d}_{r.config.dataset}_k{r.config.n_features}"
        if r.explanations:
            os.makedirs(os.path.join(out_dir, "explanations"), exist_ok=True)
            save_csv(explanation_frame(r.explanations, r.columns), os.path.join("explanations", f"{stem}.csv"))
        if r.tree is not None:
            os.makedirs(os.path.join(out_dir, "importance"), exist_ok=True)
            save_csv(importance_frame(r.tree, r.columns), os.path.join("importance", f"{stem}.csv"))
            os.makedirs(os.path.join(out_dir, "rules"), exist_ok=True)
            path = os.path.join(out_dir, "rules", f"{stem}.txt")
            with open(path, "w", encoding="utf-8") as f:
                f.write(rules_text(extract_rules(r.tree, r.columns)) + "\n")
            written.append(path)
        if dump_models and r.svr is not None:
            os.makedirs(os.path.join(out_dir, "models"), exist_ok=True)
            path = os.path.join(out_dir, "models", f"{stem}.json")
            save_model(r.svr, path)
            written.append(path)

    path = os.path.join(out_dir, "report.md")
    with open(path, "w", encoding="utf-8") as f:
        f.write(render_report(summary))
    written.append(path)
    logger.info("结果已写入 %s (%d 个文件)", out_dir, len(written))
    return written


def render_instance_report(rep: "InstanceReport", digits: int = 4) -> str:
    """
    单条测试记录的三种解释并排展示
    """
    c = rep.config
    e = rep.explanation
    lines = [
        f"数据集 {c.dataset}, 特征数 {c.n_features}, 种子 {c.seed}, 测试集第 {rep.row} 行",
        f"真实值 {rep.y_true:.{digits}g} | SVR 预测 {rep.svr_prediction:.{digits}g}",
        "",
        "特征取值 (标准化后 / 原始):",
    ]
    for name, z, raw in zip(rep.columns, rep.instance, rep.raw_instance):
        lines.append(f"  {name:<28} {z:>12.{digits}g} {raw:>12.{digits}g}")

    lines += [
        "",
        f"[决策树] 预测 {rep.tree_prediction:.{digits}g}，经过节点 {' -> '.join(str(k) for k in rep.tree_path)}",
        f"  {rep.tree_rule.to_text(digits)}",
        "  特征重要性: " + ", ".join(
            f"{row.feature}={row.importance:.3f}" for row in importance_frame(rep.tree, rep.columns).itertuples()
            if row.importance > 0
        ),
        "",
        f"[多元线性回归] 预测 {rep.mlr_prediction:.{digits}g} = 截距 {rep.mlr_intercept:.{digits}g} + 各特征贡献:",
    ]
    for name, contrib in zip(rep.columns, rep.mlr_contributions):
        lines.append(f"  {name:<28} {contrib:>+12.{digits}g}")

    lines += [
        "",
        f"[LIME] 预测 {e.local_prediction:.{digits}g} = 截距 {e.intercept:.{digits}g} + 权重 x 特征值:",
    ]
    for name, weight in e.as_pairs(rep.columns):
        lines.append(f"  {name:<28} {weight:>+12.{digits}g}")
    lines.append(f"  与 SVR 的平方误差 {e.squared_error:.{digits}g}")
    return "\n".join(lines)
