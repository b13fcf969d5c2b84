from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from dataset_schemas import (
    DatasetSchema,
    get_schema,
    normalize_column_name,
    normalize_columns,
)
from errors import ArgumentError, DatasetReadError, EmptyDatasetError, SchemaError

logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    特征矩阵 + 数值目标 + 列名，加载之后不再修改
    notes 记录加载过程中的偏差报告 (丢弃的行和列、去重、与期望计数不一致的情况)
    """
    name: str
    columns: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    target_name: str
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        X = _frozen(self.X)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, max(len(self.columns), 1)))
        y = _frozen(np.ravel(self.y))
        if X.shape[0] != y.shape[0]:
            raise ArgumentError(f"X 行数 {X.shape[0]} 与 y 长度 {y.shape[0]} 不一致")
        if X.shape[1] != len(self.columns):
            raise ArgumentError(f"X 列数 {X.shape[1]} 与列名数量 {len(self.columns)} 不一致")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.X.shape[1])

    def take(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return replace(self, X=self.X[rows], y=self.y[rows])

    def project(self, indices: Sequence[int]) -> "Dataset":
        indices = [int(i) for i in indices]
        return replace(self, X=self.X[:, indices], columns=tuple(self.columns[i] for i in indices))

    def with_X(self, X: np.ndarray) -> "Dataset":
        return replace(self, X=X)


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    test_fraction: float
    train_index: np.ndarray
    test_index: np.ndarray


@dataclass(frozen=True)
class FeatureSubset:
    parent: str
    indices: tuple[int, ...]
    k: int


@dataclass(frozen=True, eq=False)
class ScalingParams:
    """
    训练集统计量；degenerate 为 True 的特征 (方差为 0) 原样通过，不做缩放
    """
    columns: tuple[str, ...]
    center: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.center) / self.scale

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.scale + self.center

    @property
    def degenerate_columns(self) -> list[str]:
        return [c for c, flag in zip(self.columns, self.degenerate) if flag]


def describe(d: Dataset) -> str:
    return f"{d.name}: {d.n_rows} 行, {d.n_features} 个特征 + 目标 {d.target_name}"


def _is_number(text) -> bool:
    try:
        v = float(str(text).strip().strip('"'))
    except (TypeError, ValueError):
        return False
    return not math.isnan(v)


def _detect_delimiter(lines: list[str]) -> Optional[str]:
    """
    返回 ',' / ';' / None(空白分隔)
    """
    for delim in (";", ","):
        if all(delim in line for line in lines):
            return delim
    return None


def _detect_header(raw: pd.DataFrame) -> bool:
    """
    第一行的非数值单元格比第二行多，就认为第一行是表头
    """
    def non_numeric(row) -> int:
        return sum(1 for v in row if isinstance(v, str) and v.strip() and not _is_number(v))

    if raw.empty:
        return False
    first = non_numeric(raw.iloc[0].tolist())
    if len(raw) == 1:
        return first == raw.shape[1]
    return first > non_numeric(raw.iloc[1].tolist())


def _read_raw(path: str) -> pd.DataFrame:
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as f:
            lines = [line for line in f if line.strip()]
    except OSError as e:
        raise DatasetReadError(f"无法读取数据文件 {path}: {e}") from e

    if not lines:
        raise EmptyDatasetError(f"{path} 中没有任何数据行")

    delimiter = _detect_delimiter(lines[:5])
    try:
        if delimiter is None:
            raw = pd.read_csv(path, sep=r"\s+", header=None, dtype=str, quotechar='"', skip_blank_lines=True)
        else:
            raw = pd.read_csv(path, sep=delimiter, header=None, dtype=str, quotechar='"', skip_blank_lines=True,
                              skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DatasetReadError(f"无法解析数据文件 {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise EmptyDatasetError(f"{path} 中没有任何数据行") from e
    return raw


class DataLoader:
    def __init__(self, data_dir: Optional[str] = None, schemas: Optional[Mapping[str, DatasetSchema]] = None):
        """
        :param data_dir: UCI 数据文件所在目录，默认读取环境变量 BENCH_DATA_DIR，再退回 data/uci
        :param schemas: manifest 中用户声明的额外 schema
        """
        self.data_dir = data_dir or os.getenv("BENCH_DATA_DIR", os.path.join("data", "uci"))
        self.schemas = dict(schemas or {})

    def resolve(self, name: str, path: Optional[str] = None) -> tuple[str, DatasetSchema]:
        schema = get_schema(name, self.schemas)
        if schema is None:
            raise SchemaError(f"未注册的数据集: {name}")
        return path or os.path.join(self.data_dir, schema.file_name), schema

    def load(self, name: str, path: Optional[str] = None) -> Dataset:
        path, schema = self.resolve(name, path)
        return self.load_dataset(path, schema)

    def load_dataset(self, path: str, schema: DatasetSchema) -> Dataset:
        """
        读取 CSV / 空白分隔文件并按 schema 校验
        行列数与 schema 不一致时照常返回，偏差写进 Dataset.notes
        """
        if not os.path.exists(path):
            raise DatasetReadError(f"数据文件不存在: {path}")

        logger.info("正在加载 %s (%s)", schema.name, path)
        raw = _read_raw(path)
        notes: list[str] = []

        if _detect_header(raw):
            header = [normalize_column_name(v) for v in raw.iloc[0].tolist()]
            raw = raw.iloc[1:].reset_index(drop=True)
            if schema.columns is None or len(schema.columns) != raw.shape[1]:
                raw.columns = header
                raw = normalize_columns(raw)
        if schema.columns is not None:
            if len(schema.columns) != raw.shape[1]:
                raise SchemaError(
                    f"{schema.name}: 文件有 {raw.shape[1]} 列，schema 声明了 {len(schema.columns)} 个列名"
                )
            raw.columns = list(schema.columns)
        elif all(isinstance(c, (int, np.integer)) for c in raw.columns):
            raw.columns = [f"col_{i}" for i in range(raw.shape[1])]

        if raw.empty:
            raise EmptyDatasetError(f"{path} 中没有任何数据行")

        target = normalize_column_name(schema.target) if schema.target not in raw.columns else schema.target
        if target not in raw.columns:
            raise SchemaError(f"{schema.name}: 找不到目标列 {schema.target}")

        dropped = [c for c in schema.drop_columns if c in raw.columns]
        if dropped:
            raw = raw.drop(columns=dropped)
            notes.append(f"按 schema 丢弃列: {', '.join(dropped)}")

        numeric = raw.apply(pd.to_numeric, errors="coerce")
        present = raw.notna() & raw.apply(lambda s: s.astype(str).str.strip() != "")

        if numeric[target].notna().sum() == 0 and present[target].any():
            raise SchemaError(f"{schema.name}: 目标列 {target} 不是数值")

        text_cols = [
            c for c in numeric.columns
            if c != target and numeric[c].notna().sum() == 0 and present[c].any()
        ]
        if text_cols:
            numeric = numeric.drop(columns=text_cols)
            notes.append(f"丢弃非数值特征列: {', '.join(text_cols)}")
        # 比较的是丢弃文本列之后的列数
        if schema.n_columns and numeric.shape[1] != schema.n_columns:
            notes.append(f"列数 {numeric.shape[1]} 与期望的 {schema.n_columns} 不一致")

        n_parsed = len(numeric)
        numeric = numeric.dropna(axis=0, how="any")
        n_missing = n_parsed - len(numeric)
        if n_missing:
            notes.append(f"丢弃 {n_missing} 行缺失或无法解析的数据")

        if numeric.empty:
            raise EmptyDatasetError(f"{path} 中没有可解析的数值行")

        if schema.deduplicate:
            before = len(numeric)
            numeric = numeric.drop_duplicates()
            if before != len(numeric):
                notes.append(f"去除 {before - len(numeric)} 行完全重复的数据")

        if schema.n_rows and len(numeric) != schema.n_rows:
            notes.append(f"行数 {len(numeric)} 与期望的 {schema.n_rows} 不一致")

        features = [c for c in numeric.columns if c != target]
        d = Dataset(
            name=schema.name,
            columns=tuple(features),
            X=numeric[features].to_numpy(dtype=np.float64),
            y=numeric[target].to_numpy(dtype=np.float64),
            target_name=target,
            notes=tuple(notes),
        )
        for note in notes:
            logger.warning("[%s] %s", schema.name, note)
        logger.info("加载完成 %s", describe(d))
        return d


def split(d: Dataset, test_fraction: float = 0.2, seed: int = 0) -> SplitPair:
    """
    随机划分训练/测试集
    测试集大小 = floor(test_fraction * n + 0.5)，限制在 [1, n-1]
    """
    if not (0.0 < test_fraction < 1.0):
        raise ArgumentError(f"test_fraction 必须在 (0, 1) 之间: {test_fraction}")
    n = d.n_rows
    if n < 2:
        raise ArgumentError(f"至少需要 2 行数据才能划分，当前 {n} 行")

    n_test = int(math.floor(test_fraction * n + 0.5))
    n_test = min(max(n_test, 1), n - 1)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_index = np.sort(perm[:n_test])
    train_index = np.sort(perm[n_test:])
    return SplitPair(
        train=d.take(train_index),
        test=d.take(test_index),
        seed=seed,
        test_fraction=test_fraction,
        train_index=train_index,
        test_index=test_index,
    )


def feature_subset(d: Dataset, k: int, seed: int = 0) -> FeatureSubset:
    if not (1 <= k <= d.n_features):
        raise ArgumentError(f"特征数 k={k} 超出范围 [1, {d.n_features}]")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(d.n_features, size=k, replace=False))
    return FeatureSubset(parent=d.name, indices=tuple(int(i) for i in chosen), k=k)


def select_features(d: Dataset, k: int, seed: int = 0) -> Dataset:
    """
    无放回地均匀抽取 k 个特征，保持原有列顺序；目标列不动
    """
    subset = feature_subset(d, k, seed)
    return d.project(subset.indices)


def standardize(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, ScalingParams]:
    """
    用训练集的均值和样本标准差 (ddof=1) 标准化训练集和测试集
    方差为 0 的特征原样通过并标记
    """
    X = train.X
    if train.n_rows >= 2:
        center = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
    else:
        center = np.zeros(train.n_features)
        sd = np.zeros(train.n_features)

    degenerate = ~np.isfinite(sd) | (sd <= 1e-12 * np.maximum(1.0, np.abs(center)))
    center = np.where(degenerate, 0.0, center)
    scale = np.where(degenerate, 1.0, sd)

    params = ScalingParams(
        columns=train.columns,
        center=_frozen(center),
        scale=_frozen(scale),
        degenerate=np.array(degenerate, dtype=bool),
    )
    if params.degenerate_columns:
        logger.warning("[%s] 方差为 0 的特征未缩放: %s", train.name, ", ".join(params.degenerate_columns))
    return train.with_X(params.transform(train.X)), test.with_X(params.transform(test.X)), params
