from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

import pandas as pd


@dataclass(frozen=True)
class DatasetSchema:
    """
    一个 UCI 回归数据集的描述
    :param name: 内部标识 (wine / boston / yacht / computer_hardware / auto)
    :param title: 输出表格里使用的名称 (与发布的结果表一致)
    :param file_name: data_dir 下的默认文件名
    :param columns: 列名；为 None 时使用文件自带的表头
    :param target: 目标列名
    :param n_columns: 期望列数 (包含目标列)
    :param n_rows: 期望行数
    """
    name: str
    title: str
    file_name: str
    target: str
    n_columns: int
    n_rows: int
    columns: Optional[tuple[str, ...]] = None
    drop_columns: tuple[str, ...] = ()
    deduplicate: bool = False
    url: str = ""
    aliases: tuple[str, ...] = field(default=(), compare=False)


UCI_BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

WINE = DatasetSchema(
    name="wine",
    title="Wine",
    file_name="winequality-red.csv",
    target="quality",
    n_columns=12,
    n_rows=1359,
    # 原始 1599 行去掉完全重复的行后正好是 1359
    deduplicate=True,
    url=f"{UCI_BASE}/wine-quality/winequality-red.csv",
    aliases=("winequality", "wine quality", "red wine", "winequality red"),
)

BOSTON = DatasetSchema(
    name="boston",
    title="Boston Housing",
    file_name="housing.data",
    target="medv",
    n_columns=14,
    n_rows=506,
    columns=(
        "crim", "zn", "indus", "chas", "nox", "rm", "age",
        "dis", "rad", "tax", "ptratio", "b", "lstat", "medv",
    ),
    url=f"{UCI_BASE}/housing/housing.data",
    aliases=("boston housing", "housing"),
)

YACHT = DatasetSchema(
    name="yacht",
    title="Yatch hydrodynamics",
    file_name="yacht_hydrodynamics.data",
    target="residuary_resistance",
    n_columns=7,
    n_rows=308,
    columns=(
        "longitudinal_position", "prismatic_coefficient", "length_displacement_ratio",
        "beam_draught_ratio", "length_beam_ratio", "froude_number", "residuary_resistance",
    ),
    url=f"{UCI_BASE}/00243/yacht_hydrodynamics.data",
    aliases=("yacht hydrodynamics", "yatch hydrodynamics", "yatch"),
)

COMPUTER_HARDWARE = DatasetSchema(
    name="computer_hardware",
    title="Computer Hardware",
    file_name="machine.data",
    target="prp",
    n_columns=10,
    n_rows=209,
    # vendor / model 是文本列，加载时作为非数值特征丢弃
    columns=("vendor", "model", "myct", "mmin", "mmax", "cach", "chmin", "chmax", "prp", "erp"),
    url=f"{UCI_BASE}/cpu-performance/machine.data",
    aliases=("computer hardware", "machine", "cpu", "cpu performance", "hardware"),
)

AUTO = DatasetSchema(
    name="auto",
    title="Auto",
    file_name="auto-mpg.data",
    target="mpg",
    n_columns=7,
    n_rows=398,
    columns=(
        "mpg", "cylinders", "displacement", "horsepower", "weight",
        "acceleration", "model_year", "origin", "car_name",
    ),
    drop_columns=("origin", "car_name"),
    url=f"{UCI_BASE}/auto-mpg/auto-mpg.data",
    aliases=("auto mpg", "automobile", "autompg"),
)

REGISTERED_SCHEMAS: dict[str, DatasetSchema] = {
    s.name: s for s in (WINE, BOSTON, YACHT, COMPUTER_HARDWARE, AUTO)
}


def _alias_key(name: str) -> str:
    key = (name or "").strip().lower()
    key = re.sub(r"[-_./]+", " ", key)
    return re.sub(r"\s+", " ", key)


def get_schema(name: str, extra: Optional[Mapping[str, DatasetSchema]] = None) -> Optional[DatasetSchema]:
    """
    按名称或别名查找 schema，用户在 manifest 里声明的 schema 优先
    """
    key = _alias_key(name)
    pools = [extra or {}, REGISTERED_SCHEMAS]
    for pool in pools:
        for schema in pool.values():
            if key == _alias_key(schema.name) or key == _alias_key(schema.title):
                return schema
            if key in {_alias_key(a) for a in schema.aliases}:
                return schema
    return None


def normalize_column_name(name: str) -> str:
    """
    统一成小写 + 下划线，例如 '"fixed acidity"' -> fixed_acidity
    """
    n = str(name).strip().strip('"').strip("'").strip().lower()
    n = re.sub(r"[^0-9a-z]+", "_", n)
    return n.strip("_")


def normalize_columns(df: pd.DataFrame) -> pd.DataFrame:
    """
    对整个 DataFrame 的列名做 normalize_column_name；重名时追加序号
    """
    seen: dict[str, int] = {}
    names = []
    for col in df.columns:
        n = normalize_column_name(col) or "col"
        if n in seen:
            seen[n] += 1
            n = f"{n}_{seen[n]}"
        else:
            seen[n] = 0
        names.append(n)
    df = df.copy()
    df.columns = names
    return df
