import math

import numpy as np
import pandas as pd
import pytest

from conftest import TABLE2, TABLE3
from errors import ArgumentError
from fidelity_metrics import (
    TIES_STRICT,
    FidelityReport,
    LocalWinCounts,
    global_fidelity,
    local_preference_rate,
    local_win_counts,
    rmse,
    round_half_up,
    win_rate,
)


def published_fidelity():
    df = pd.read_csv(TABLE2)
    return [FidelityReport(rmse_mlr=r[2], rmse_tree=r[3], rmse_lime=r[4]) for r in df.itertuples(index=False)]


def published_counts():
    df = pd.read_csv(TABLE3)
    return [LocalWinCounts(x1=int(r[1]), x2=int(r[2]), T=int(r[3])) for r in df.itertuples(index=False)]


def test_rmse():
    assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert math.isclose(rmse([0.0, 0.0], [3.0, 4.0]), math.sqrt(12.5))
    with pytest.raises(ArgumentError):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(ArgumentError):
        rmse([], [])


def test_global_fidelity_with_constant_offsets():
    ref = np.linspace(-2.0, 2.0, 9)
    report = global_fidelity(ref, tree_preds=ref, lin_preds=ref + 1.0, lime_preds=ref - 1.0)
    assert report.rmse_mlr == pytest.approx(1.0, abs=1e-12)
    assert report.rmse_tree == 0.0
    assert report.rmse_lime == pytest.approx(1.0, abs=1e-12)
    assert set(report.to_dict()) == {"rmse_mlr", "rmse_tree", "rmse_lime"}


def test_fidelity_report_rejects_bad_values():
    with pytest.raises(ArgumentError):
        FidelityReport(rmse_mlr=-1.0, rmse_tree=0.0, rmse_lime=0.0)
    with pytest.raises(ArgumentError):
        FidelityReport(rmse_mlr=0.0, rmse_tree=float("nan"), rmse_lime=0.0)


def test_local_win_counts_ties():
    svr = np.zeros(4)
    tree = np.array([1.0, 0.5, 2.0, 0.0])
    lime = np.array([1.0, 1.0, 1.0, 0.0])
    lin = np.array([-1.0, 3.0, 0.0, 0.0])
    inc = local_win_counts(tree, lin, lime, svr)
    assert (inc.x1, inc.x2, inc.T) == (3, 3, 4)
    strict = local_win_counts(tree, lin, lime, svr, ties=TIES_STRICT)
    assert (strict.x1, strict.x2) == (1, 1)
    with pytest.raises(ArgumentError):
        local_win_counts(tree, lin, lime, svr, ties="sometimes")


def test_local_win_counts_validation():
    with pytest.raises(ArgumentError):
        LocalWinCounts(x1=0, x2=0, T=0)
    with pytest.raises(ArgumentError):
        LocalWinCounts(x1=5, x2=1, T=4)


def test_published_percentages():
    c = LocalWinCounts(x1=236, x2=260, T=272)
    assert round_half_up(c.pct1, 2) == 86.76
    assert round_half_up(c.pct2, 2) == 95.59
    c = LocalWinCounts(x1=37, x2=42, T=42)
    assert round_half_up(c.pct1, 2) == 88.10
    assert c.pct2 == 100.0
    assert c.to_dict()["x2"] == 42


def test_round_half_up():
    assert round_half_up(2.5) == 3.0
    assert round_half_up(0.125, 2) == 0.13
    assert round_half_up(86.6666, 0) == 87.0


def test_win_rate_on_published_table():
    w = win_rate(published_fidelity())
    assert w.n_runs == 15
    assert (w.tree_lt_lime, w.mlr_lt_lime, w.tree_lt_mlr) == (13, 11, 9)
    assert (w.pct_tree_lt_lime, w.pct_mlr_lt_lime, w.pct_tree_lt_mlr) == (87, 73, 60)
    assert w.to_dict()["pct_tree_lt_lime"] == 87


def test_win_rate_is_strict():
    w = win_rate([FidelityReport(rmse_mlr=1.0, rmse_tree=1.0, rmse_lime=1.0)])
    assert (w.tree_lt_lime, w.mlr_lt_lime, w.tree_lt_mlr) == (0, 0, 0)
    with pytest.raises(ArgumentError):
        win_rate([])


def test_local_preference_on_published_table():
    rows = published_counts()
    assert local_preference_rate(rows) == (10, 15, 67)
    assert local_preference_rate(rows, ties=TIES_STRICT) == (7, 15, 47)
    with pytest.raises(ArgumentError):
        local_preference_rate([])
