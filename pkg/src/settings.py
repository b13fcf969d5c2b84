"""
实验配置: 纯文本 key=value manifest

    # 注释行和空行忽略，key 不区分大小写，后出现的覆盖先出现的
    seed = 0
    svr.c = 1.0
    lime.n_samples = 5000
    run = wine:9          # 可重复；run = <数据集>:<特征数>[:<种子>]
    dataset.mydata.path = mydata.csv
    dataset.mydata.target = y

优先级: 命令行参数 > 环境变量 (BENCH_DATA_DIR) > manifest > 代码中的默认值
"""
from __future__ import annotations

import copy
import logging
import os
from typing import Optional

from data_loader import DataLoader
from dataset_schemas import DatasetSchema, get_schema
from errors import ArgumentError
from experiment import RunConfig
from lime_explainer import LimeParams
from suite_pool import SuitePool
from surrogates import TreeParams
from svr_model import KernelSpec, SvrParams

logger = logging.getLogger(__name__)

_FLOAT, _INT, _BOOL, _STR = "float", "int", "bool", "str"

# key -> (所属分组, 字段名, 类型)
_SCALAR_KEYS = {
    "data_dir": (None, "data_dir", _STR),
    "seed": (None, "seed", _INT),
    "test_fraction": (None, "test_fraction", _FLOAT),
    "standardize": (None, "standardize", _BOOL),
    "fidelity_reference": (None, "fidelity_reference", _STR),
    "ties": (None, "ties", _STR),
    "svr.c": ("svr", "C", _FLOAT),
    "svr.epsilon": ("svr", "epsilon", _FLOAT),
    "svr.kernel": ("svr", "kernel", _STR),
    "svr.gamma": ("svr", "gamma", _STR),
    "svr.tol": ("svr", "tol", _FLOAT),
    "svr.max_iter": ("svr", "max_iter", _INT),
    "tree.min_split": ("tree", "min_split", _INT),
    "tree.min_bucket": ("tree", "min_bucket", _INT),
    "tree.max_depth": ("tree", "max_depth", _INT),
    "tree.cp": ("tree", "cp", _FLOAT),
    "lime.n_samples": ("lime", "n_samples", _INT),
    "lime.kernel_width": ("lime", "kernel_width", _STR),
    "lime.n_features_used": ("lime", "n_features_used", _STR),
    "lime.ridge_lambda": ("lime", "ridge_lambda", _FLOAT),
}

_DATASET_FIELDS = {"path", "target", "columns", "rows", "names", "drop", "deduplicate"}

FIDELITY_REFERENCES = ("blackbox", "truth")
TIES_RULES = ("include", "strict")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"无法解析为布尔值: {text}")


def _convert(text: str, kind: str):
    if kind == _FLOAT:
        return float(text)
    if kind == _INT:
        return int(text)
    if kind == _BOOL:
        return _parse_bool(text)
    return text.strip()


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _parse_run(text: str) -> dict:
    parts = [p.strip() for p in text.split(":")]
    if len(parts) not in (2, 3) or not parts[0]:
        raise ValueError(f"run 的格式应为 <数据集>:<特征数>[:<种子>]，实际是 {text!r}")
    run = {"dataset": parts[0], "n_features": int(parts[1]), "seed": None}
    if len(parts) == 3:
        run["seed"] = int(parts[2])
    return run


class Settings:
    def __init__(self, filepath: Optional[str] = None):
        """
        :param filepath: manifest 路径；None 时全部使用默认值
        """
        self.filepath = filepath
        self.data = self._load_data()
        self._apply_env()
        self._validate()

    def _default_settings(self) -> dict:
        return {
            "data_dir": None,
            "seed": 0,
            "test_fraction": 0.2,
            "standardize": True,
            "fidelity_reference": "blackbox",
            "ties": "include",
            "svr": {"C": 1.0, "epsilon": 0.1, "kernel": "rbf", "gamma": "auto", "tol": 1e-3, "max_iter": 1_000_000},
            "tree": {"min_split": 20, "min_bucket": 7, "max_depth": 30, "cp": 0.01},
            "lime": {"n_samples": 5000, "kernel_width": "auto", "n_features_used": "all", "ridge_lambda": 1e-3},
            "datasets": {},
            "runs": [],
        }

    def _load_data(self) -> dict:
        data = self._default_settings()
        if self.filepath is None:
            return data
        if not os.path.exists(self.filepath):
            raise ArgumentError(f"manifest 文件不存在: {self.filepath}")
        with open(self.filepath, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ArgumentError(f"{self.filepath}:{lineno}: 缺少 '='")
                key, value = (s.strip() for s in text.split("=", 1))
                try:
                    self._set(data, key.lower(), value)
                except (ValueError, KeyError) as e:
                    raise ArgumentError(f"{self.filepath}:{lineno}: {e}") from None
        return data

    def _set(self, data: dict, key: str, value: str):
        if key == "run":
            data["runs"].append(_parse_run(value))
            return
        if key.startswith("dataset."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in _DATASET_FIELDS:
                raise ValueError(f"无法识别的数据集配置: {key}")
            data["datasets"].setdefault(parts[1], {})[parts[2]] = value
            return
        if key not in _SCALAR_KEYS:
            raise ValueError(f"无法识别的配置项: {key}")
        group, name, kind = _SCALAR_KEYS[key]
        target = data if group is None else data[group]
        target[name] = _convert(value, kind)

    def _apply_env(self):
        env_dir = os.getenv("BENCH_DATA_DIR")
        if env_dir:
            self.data["data_dir"] = env_dir

    def _validate(self):
        if self.data["fidelity_reference"] not in FIDELITY_REFERENCES:
            raise ArgumentError(f"fidelity_reference 只能是 blackbox 或 truth: {self.data['fidelity_reference']}")
        if self.data["ties"] not in TIES_RULES:
            raise ArgumentError(f"ties 只能是 include 或 strict: {self.data['ties']}")
        if self.data["seed"] < 0:
            raise ArgumentError(f"seed 不能为负: {self.data['seed']}")
        if not 0 < self.data["test_fraction"] < 1:
            raise ArgumentError(f"test_fraction 必须在 (0, 1) 之间: {self.data['test_fraction']}")
        # 构造一次参数对象，越界的值在这里就报错
        try:
            self.svr_params()
            self.tree_params()
            self.lime_params()
        except ArgumentError:
            raise
        except ValueError as e:
            raise ArgumentError(f"配置值无法解析: {e}") from None
        self.user_schemas()

    def override(self, seed: Optional[int] = None, fidelity_reference: Optional[str] = None,
                 ties: Optional[str] = None) -> "Settings":
        """
        返回应用了命令行参数的副本
        """
        other = copy.copy(self)
        other.data = copy.deepcopy(self.data)
        if seed is not None:
            other.data["seed"] = seed
        if fidelity_reference is not None:
            other.data["fidelity_reference"] = fidelity_reference
        if ties is not None:
            other.data["ties"] = ties
        other._validate()
        return other

    def get(self, key: str):
        return self.data[key]

    def svr_params(self) -> SvrParams:
        s = self.data["svr"]
        gamma = None if str(s["gamma"]).lower() == "auto" else float(s["gamma"])
        kind = str(s["kernel"]).lower()
        if kind == "linear":
            gamma = None
        return SvrParams(
            C=float(s["C"]), epsilon=float(s["epsilon"]), kernel=KernelSpec(kind, gamma),
            tol=float(s["tol"]), max_iter=int(s["max_iter"]),
        )

    def tree_params(self) -> TreeParams:
        t = self.data["tree"]
        return TreeParams(
            min_split=int(t["min_split"]), min_bucket=int(t["min_bucket"]),
            max_depth=int(t["max_depth"]), cp=float(t["cp"]),
        )

    def lime_params(self, seed: Optional[int] = None) -> LimeParams:
        l = self.data["lime"]
        width = None if str(l["kernel_width"]).lower() == "auto" else float(l["kernel_width"])
        used = None if str(l["n_features_used"]).lower() == "all" else int(l["n_features_used"])
        return LimeParams(
            n_samples=int(l["n_samples"]), kernel_width=width, n_features_used=used,
            ridge_lambda=float(l["ridge_lambda"]), seed=self.data["seed"] if seed is None else seed,
        )

    def user_schemas(self) -> dict[str, DatasetSchema]:
        schemas = {}
        for name, fields in self.data["datasets"].items():
            if "path" not in fields or "target" not in fields:
                raise ArgumentError(f"数据集 {name} 至少需要 path 和 target")
            names = _split_list(fields["names"]) if "names" in fields else None
            try:
                n_columns = int(fields.get("columns", 0))
                n_rows = int(fields.get("rows", 0))
                dedup = _parse_bool(fields.get("deduplicate", "false"))
            except ValueError as e:
                raise ArgumentError(f"数据集 {name}: {e}") from None
            schemas[name] = DatasetSchema(
                name=name,
                title=name,
                file_name=fields["path"],
                target=fields["target"],
                n_columns=n_columns,
                n_rows=n_rows,
                columns=names,
                drop_columns=_split_list(fields.get("drop", "")),
                deduplicate=dedup,
            )
        return schemas

    def loader(self) -> DataLoader:
        return DataLoader(self.data["data_dir"], self.user_schemas())

    def planned_runs(self) -> list[dict]:
        """
        manifest 中没有 run 时使用内置的 15 次运行计划
        基础种子 seed 作为偏移加到每个 run 的种子上；未写种子的 run 取序号 (从 1 开始)
        """
        offset = self.data["seed"]
        if self.data["runs"]:
            runs = []
            for i, r in enumerate(self.data["runs"]):
                seed = offset + (r["seed"] if r["seed"] is not None else i + 1)
                runs.append({"dataset": r["dataset"], "n_features": r["n_features"], "seed": seed})
            return runs
        return [
            {"dataset": p.dataset, "n_features": p.n_features, "seed": offset + p.seed}
            for p in SuitePool().get_all_runs()
        ]

    def make_config(self, dataset: str, n_features: int, seed: int) -> RunConfig:
        schema = get_schema(dataset, self.user_schemas())
        if schema is None:
            raise ArgumentError(f"未注册的数据集: {dataset}")
        return RunConfig(
            dataset=schema.name,
            n_features=n_features,
            seed=seed,
            svr=self.svr_params(),
            tree=self.tree_params(),
            lime=self.lime_params(seed=seed),
            test_fraction=self.data["test_fraction"],
            fidelity_reference=self.data["fidelity_reference"],
            ties=self.data["ties"],
            standardize=self.data["standardize"],
        )

    def run_configs(self) -> list[RunConfig]:
        configs = [self.make_config(r["dataset"], r["n_features"], r["seed"]) for r in self.planned_runs()]
        logger.info("共 %d 次运行", len(configs))
        return configs
