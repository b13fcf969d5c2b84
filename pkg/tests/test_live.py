import os
import time

import pytest

from conftest import DATA_DIR, ROOT
from experiment import run_suite
from reporting import render_report
from settings import Settings

pytestmark = pytest.mark.live

MANIFEST = os.path.join(DATA_DIR, "suite_manifest.txt")


def _missing_files(settings: Settings) -> list[str]:
    loader = settings.loader()
    paths = {loader.resolve(r["dataset"])[0] for r in settings.planned_runs()}
    return sorted(p for p in paths if not os.path.exists(p))


def test_bundled_suite_on_real_data(monkeypatch):
    monkeypatch.chdir(ROOT)
    monkeypatch.delenv("BENCH_DATA_DIR", raising=False)
    settings = Settings(MANIFEST)
    missing = _missing_files(settings)
    if missing:
        pytest.skip(f"缺少 UCI 数据文件: {', '.join(missing)}")

    start = time.monotonic()
    summary = run_suite(settings.run_configs(), settings.loader())
    elapsed = time.monotonic() - start

    assert summary.n_runs == 15
    assert elapsed < 600
    # 没通过有效性检查的运行必须出现在报告里
    report = render_report(summary)
    for r in summary.records:
        if not r.gate_passed:
            assert r.config.label() in report
    assert summary.win_rates.tree_lt_lime / summary.n_runs >= 0.6
