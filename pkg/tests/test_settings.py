import os

import pytest

from conftest import DATA_DIR
from errors import ArgumentError
from lime_explainer import LimeParams
from settings import Settings
from surrogates import TreeParams
from svr_model import KernelSpec, SvrParams

BUNDLED = os.path.join(DATA_DIR, "suite_manifest.txt")

CUSTOM = """
# 自定义数据集
seed = 5
SVR.C = 2.5
svr.kernel = linear
lime.kernel_width = 1.2
lime.n_features_used = 3   # 只保留 3 个特征
tree.cp = 0
ties = strict

dataset.synth.path = synth.csv
dataset.synth.target = y
dataset.synth.columns = 5
dataset.synth.rows = 80
dataset.plain.path = plain.data
dataset.plain.target = out
dataset.plain.names = a, b, out
dataset.plain.drop = b
dataset.plain.deduplicate = yes

run = synth:2
run = synth:3:42
"""


@pytest.fixture(autouse=True)
def no_env_data_dir(monkeypatch):
    monkeypatch.delenv("BENCH_DATA_DIR", raising=False)


def test_defaults_without_manifest():
    s = Settings()
    assert s.get("seed") == 0
    assert s.get("fidelity_reference") == "blackbox"
    assert s.svr_params() == SvrParams()
    assert s.tree_params() == TreeParams()
    assert s.lime_params() == LimeParams()
    assert len(s.planned_runs()) == 15


def test_bundled_manifest_matches_default_plan():
    s = Settings(BUNDLED)
    assert s.get("data_dir") == os.path.join("data", "uci")
    assert s.planned_runs() == Settings().planned_runs()
    first = s.planned_runs()[0]
    assert first == {"dataset": "wine", "n_features": 9, "seed": 1}
    configs = s.run_configs()
    assert [c.label() for c in configs[:2]] == ["wine:9:1", "wine:8:2"]
    assert configs[-1].dataset == "auto"


def test_custom_manifest(write_text):
    s = Settings(write_text("m.txt", CUSTOM))
    assert s.svr_params() == SvrParams(C=2.5, kernel=KernelSpec("linear"))
    lime = s.lime_params()
    assert lime.kernel_width == 1.2
    assert lime.n_features_used == 3
    assert lime.seed == 5
    assert s.tree_params().cp == 0.0
    assert s.get("ties") == "strict"

    schemas = s.user_schemas()
    assert schemas["synth"].n_columns == 5
    assert schemas["synth"].columns is None
    plain = schemas["plain"]
    assert plain.columns == ("a", "b", "out")
    assert plain.drop_columns == ("b",)
    assert plain.deduplicate


def test_run_seeds(write_text):
    s = Settings(write_text("m.txt", CUSTOM))
    runs = s.planned_runs()
    assert runs == [
        {"dataset": "synth", "n_features": 2, "seed": 6},
        {"dataset": "synth", "n_features": 3, "seed": 47},
    ]
    shifted = s.override(seed=10).planned_runs()
    assert [r["seed"] for r in shifted] == [11, 52]


def test_seed_offsets_default_plan():
    runs = Settings().override(seed=100).planned_runs()
    assert [r["seed"] for r in runs] == list(range(101, 116))


def test_seed_offsets_bundled_manifest():
    s = Settings(BUNDLED)
    shifted = s.override(seed=500).planned_runs()
    assert [r["seed"] for r in shifted] == list(range(501, 516))
    assert [r["dataset"] for r in shifted] == [r["dataset"] for r in s.planned_runs()]
    assert shifted == Settings().override(seed=500).planned_runs()


def test_make_config_resolves_alias():
    s = Settings()
    c = s.make_config("Boston Housing", 5, 3)
    assert c.dataset == "boston"
    assert c.lime.seed == 3
    assert c.test_fraction == 0.2
    with pytest.raises(ArgumentError):
        s.make_config("nowhere", 2, 0)


def test_user_dataset_config(write_text, tmp_path):
    s = Settings(write_text("m.txt", CUSTOM + f"\ndata_dir = {tmp_path}\n"))
    loader = s.loader()
    assert loader.data_dir == str(tmp_path)
    path, schema = loader.resolve("synth")
    assert path == str(tmp_path / "synth.csv")
    assert s.run_configs()[0].dataset == "synth"


def test_env_overrides_manifest_data_dir(monkeypatch, tmp_path):
    monkeypatch.setenv("BENCH_DATA_DIR", str(tmp_path))
    s = Settings(BUNDLED)
    assert s.get("data_dir") == str(tmp_path)


def test_override_values():
    s = Settings().override(fidelity_reference="truth", ties="strict")
    assert s.get("fidelity_reference") == "truth"
    assert s.get("ties") == "strict"
    assert Settings().get("ties") == "include"
    with pytest.raises(ArgumentError):
        Settings().override(ties="maybe")


@pytest.mark.parametrize(
    "text",
    [
        "unknown.key = 1",
        "seed 5",
        "run = wine",
        "run = wine:x",
        "standardize = perhaps",
        "lime.n_samples = many",
        "fidelity_reference = oracle",
        "svr.c = 0",
        "tree.min_bucket = 50",
        "test_fraction = 1.5",
        "seed = -1",
        "dataset.x.colour = red",
        "dataset.x.path = x.csv",
    ],
)
def test_bad_manifest(write_text, text):
    with pytest.raises(ArgumentError):
        Settings(write_text("bad.txt", text + "\n"))


def test_error_names_line(write_text):
    path = write_text("bad.txt", "seed = 1\n\nlime.n_samples = many\n")
    with pytest.raises(ArgumentError, match=":3:"):
        Settings(path)


def test_missing_manifest(tmp_path):
    with pytest.raises(ArgumentError):
        Settings(str(tmp_path / "absent.txt"))
