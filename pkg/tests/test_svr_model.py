import math

import numpy as np
import pytest
from scipy.optimize import minimize

from errors import ArgumentError, ConvergenceError
from svr_model import (
    KernelSpec,
    SvrParams,
    fit_svr,
    kernel_eval,
    kernel_matrix,
    load_model,
    predict_svr,
    save_model,
)


def dual_oracle(X, y, p: SvrParams) -> float:
    """
    独立求解 2n 变量的对偶问题 (SLSQP + 有效集修正)，返回最优目标值
    """
    n = X.shape[0]
    K = kernel_matrix(p.kernel.resolve(X.shape[1]), X, X)
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    Q = np.outer(sign, sign) * np.block([[K, K], [K, K]])
    lin = np.concatenate([p.epsilon - y, p.epsilon + y])

    res = minimize(
        lambda a: 0.5 * a @ Q @ a + lin @ a,
        np.zeros(2 * n),
        jac=lambda a: Q @ a + lin,
        bounds=[(0.0, p.C)] * (2 * n),
        constraints=[{"type": "eq", "fun": lambda a: sign @ a, "jac": lambda a: sign}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 2000},
    )
    a = np.clip(res.x, 0.0, p.C)
    best = 0.5 * a @ Q @ a + lin @ a

    # 固定在边界上的变量不动，自由变量解等式约束下的 KKT 方程组
    at_upper = a > p.C - 1e-7
    free = (a > 1e-7) & ~at_upper
    if free.any():
        fixed = np.where(at_upper, p.C, 0.0)
        f = np.flatnonzero(free)
        m = f.size
        A = np.zeros((m + 1, m + 1))
        A[:m, :m] = Q[np.ix_(f, f)]
        A[:m, m] = sign[f]
        A[m, :m] = sign[f]
        rhs = np.concatenate([-(lin[f] + Q[f] @ fixed), [-(sign @ fixed)]])
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
        polished = fixed.copy()
        polished[f] = sol[:m]
        if np.all(polished >= -1e-12) and np.all(polished <= p.C + 1e-12) and abs(sign @ polished) < 1e-10:
            best = min(best, 0.5 * polished @ Q @ polished + lin @ polished)
    return float(best)


def test_kernel_eval():
    assert kernel_eval(KernelSpec(), [1.0, 2.0], [1.0, 2.0]) == 1.0
    assert math.isclose(kernel_eval(KernelSpec(), [0.0, 0.0], [1.0, 1.0]), math.exp(-1.0))
    assert kernel_eval(KernelSpec("linear"), [1.0, 2.0], [3.0, 4.0]) == 11.0
    with pytest.raises(ArgumentError):
        kernel_eval(KernelSpec(), [1.0], [1.0, 2.0])


def test_invalid_params():
    with pytest.raises(ArgumentError):
        KernelSpec("poly")
    with pytest.raises(ArgumentError):
        KernelSpec("rbf", gamma=0.0)
    with pytest.raises(ArgumentError):
        SvrParams(C=0.0)
    with pytest.raises(ArgumentError):
        SvrParams(epsilon=-1.0)


def test_constant_target_gives_constant_model():
    X = np.random.default_rng(0).normal(size=(15, 3))
    m = fit_svr(X, np.full(15, 2.5))
    assert m.n_support == 0
    np.testing.assert_allclose(predict_svr(m, X), 2.5, atol=1e-12)


def test_linear_kernel_fits_linear_data_within_tube():
    r = np.random.default_rng(1)
    X = r.normal(size=(20, 2))
    y = 1.5 * X[:, 0] - 2.0 * X[:, 1] + 0.3
    p = SvrParams(C=100.0, epsilon=0.1, kernel=KernelSpec("linear"), tol=1e-8)
    m = fit_svr(X, y, p)
    assert np.max(np.abs(predict_svr(m, X) - y)) <= 0.1 + 1e-6


@pytest.mark.parametrize("seed", range(50))
def test_dual_objective_matches_oracle_and_kkt(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(3, 21))
    d = int(r.integers(1, 5))
    X = r.normal(size=(n, d))
    y = r.normal(size=n)
    kernel = KernelSpec("linear") if seed % 5 == 0 else KernelSpec("rbf", float(r.uniform(0.2, 2.0)))
    p = SvrParams(C=float(r.uniform(0.5, 5.0)), epsilon=float(r.uniform(0.01, 0.3)), kernel=kernel, tol=1e-9)
    m = fit_svr(X, y, p)

    assert abs(m.dual_objective - dual_oracle(X, y, p)) <= 1e-6

    beta = np.zeros(n)
    beta[m.support_index] = m.beta
    assert abs(beta.sum()) <= 1e-8
    assert np.all(np.abs(beta) <= p.C + 1e-12)

    resid = y - predict_svr(m, X)
    slack = 1e-6
    inside = np.abs(resid) < p.epsilon - slack
    assert np.all(beta[inside] == 0)
    free = (np.abs(beta) > 1e-10) & (np.abs(beta) < p.C - 1e-10)
    np.testing.assert_allclose(np.abs(resid[free]), p.epsilon, atol=1e-5)
    bound = np.abs(beta) >= p.C - 1e-10
    assert np.all(np.abs(resid[bound]) >= p.epsilon - 1e-5)
    # beta 的符号与残差方向一致
    assert np.all(beta[np.abs(beta) > 1e-10] * resid[np.abs(beta) > 1e-10] > 0)


def test_max_iter_raises_convergence_error():
    r = np.random.default_rng(3)
    X = r.normal(size=(30, 2))
    y = r.normal(size=30)
    with pytest.raises(ConvergenceError) as info:
        fit_svr(X, y, SvrParams(max_iter=1, tol=1e-9))
    assert info.value.n_iter == 1
    assert info.value.violation >= 1e-9


def test_predict_dimension_mismatch():
    X = np.random.default_rng(4).normal(size=(10, 3))
    m = fit_svr(X, X[:, 0])
    with pytest.raises(ArgumentError):
        predict_svr(m, np.zeros((2, 2)))


def test_fit_is_deterministic():
    r = np.random.default_rng(5)
    X = r.normal(size=(25, 3))
    y = np.sin(X[:, 0])
    a, b = fit_svr(X, y), fit_svr(X, y)
    np.testing.assert_array_equal(a.beta, b.beta)
    assert a.bias == b.bias


def test_save_and_load(tmp_path):
    r = np.random.default_rng(6)
    X = r.normal(size=(20, 2))
    m = fit_svr(X, X[:, 0] ** 2)
    path = str(tmp_path / "svr.json")
    save_model(m, path)
    loaded = load_model(path)
    np.testing.assert_allclose(predict_svr(loaded, X), predict_svr(m, X), rtol=0, atol=1e-12)
    assert loaded.kernel == m.kernel


def test_linear_kernel_recovers_exact_line():
    x = np.arange(1.0, 11.0)
    p = SvrParams(C=1000.0, epsilon=0.0, kernel=KernelSpec("linear"), tol=1e-6)
    m = fit_svr(x[:, None], 2.0 * x, p)
    np.testing.assert_allclose(predict_svr(m, x[:, None]), 2.0 * x, atol=1e-3)


@pytest.mark.parametrize("kernel", [KernelSpec(), KernelSpec("rbf", 0.5), KernelSpec("linear")])
def test_single_training_point_is_inside_tube(kernel):
    X = np.array([[0.5, -1.0]])
    p = SvrParams(epsilon=0.1, kernel=kernel)
    m = fit_svr(X, [3.0], p)
    assert abs(predict_svr(m, X)[0] - 3.0) <= 0.1 + 1e-12


def test_prediction_invariant_to_row_order():
    r = np.random.default_rng(7)
    X = r.normal(size=(30, 3))
    y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2]
    p = SvrParams(C=10.0, epsilon=0.1, tol=1e-10)
    perm = r.permutation(30)
    grid = r.normal(size=(50, 3))
    a = predict_svr(fit_svr(X, y, p), grid)
    b = predict_svr(fit_svr(X[perm], y[perm], p), grid)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-8)
