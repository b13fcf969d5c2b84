import os

import numpy as np
import pytest

from data_loader import DataLoader, Dataset
from dataset_schemas import DatasetSchema

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(ROOT, "data")
TABLE2 = os.path.join(DATA_DIR, "table2.csv")
TABLE3 = os.path.join(DATA_DIR, "table3.csv")


@pytest.fixture
def write_text(tmp_path):
    def _write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write


def make_dataset(n: int = 60, d: int = 4, seed: int = 0, name: str = "synthetic", noise: float = 0.1) -> Dataset:
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, d))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 + noise * r.normal(size=n)
    return Dataset(name=name, columns=tuple(f"f{i}" for i in range(d)), X=X, y=y, target_name="y")


def write_synthetic_csv(path: str, n: int = 80, d: int = 4, seed: int = 0, constant: bool = False) -> str:
    ds = make_dataset(n, d, seed)
    y = np.full(n, 3.0) if constant else ds.y
    header = ",".join(list(ds.columns) + ["y"])
    lines = [header] + [",".join(f"{v:.10g}" for v in list(row) + [t]) for row, t in zip(ds.X, y)]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return path


@pytest.fixture
def synthetic_loader(tmp_path):
    """
    两个用户数据集: synth (非线性目标) 和 flat (常数目标)
    """
    write_synthetic_csv(str(tmp_path / "synth.csv"), n=80, d=4, seed=1)
    write_synthetic_csv(str(tmp_path / "flat.csv"), n=60, d=3, seed=2, constant=True)
    schemas = {
        "synth": DatasetSchema(name="synth", title="Synth", file_name="synth.csv", target="y", n_columns=5, n_rows=80),
        "flat": DatasetSchema(name="flat", title="Flat", file_name="flat.csv", target="y", n_columns=4, n_rows=60),
    }
    return DataLoader(str(tmp_path), schemas)
