import numpy as np
import pytest
from scipy import stats

from shockpanel.exceptions import (
    CollinearDesign,
    SingularRestriction,
    TooFewClusters,
    UnknownCoefficient,
)
from shockpanel.regress import Absorber, DesignMatrix, lincom, ols_fe, wald_joint


def fe_instance(seed=0, n_units=4, n_years=4, p=2):
    r = np.random.default_rng(seed)
    unit = np.repeat(np.arange(n_units), n_years)
    year = np.tile(np.arange(n_years), n_units)
    n = unit.size
    X = r.standard_normal((n, p)) + 0.3 * unit[:, None]
    y = X @ np.arange(1.0, p + 1.0) + r.standard_normal(n) + unit + 0.5 * year
    names = tuple(f"x{j}" for j in range(p))
    return DesignMatrix(names, X, cluster=unit, absorb=(unit, year)), y, unit, year


def dummies(labels, drop_first):
    uniq = np.unique(labels)
    D = (labels[:, None] == uniq[None, :]).astype(float)
    return D[:, 1:] if drop_first else D


def sandwich(X, e, cluster, K):
    """Explicit-loop CR1 sandwich."""
    n = X.shape[0]
    groups = sorted(set(cluster.tolist()))
    G = len(groups)
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((X.shape[1], X.shape[1]))
    for g in groups:
        s = np.zeros(X.shape[1])
        for i in range(n):
            if cluster[i] == g:
                s += X[i] * e[i]
        meat += np.outer(s, s)
    return G / (G - 1) * (n - 1) / (n - K) * bread @ meat @ bread


def test_perfect_fit():
    r = np.random.default_rng(1)
    x = r.standard_normal((20, 1))
    d = DesignMatrix(("x",), x, cluster=np.repeat(np.arange(5), 4))
    t = ols_fe(d, 2.5 * x[:, 0])
    assert t["x"] == pytest.approx(2.5, abs=1e-12)
    assert t.se[0] == pytest.approx(0.0, abs=1e-12)


def test_two_way_fe_matches_dummy_ols():
    d, y, unit, year = fe_instance()
    t = ols_fe(d, y)
    Z = np.column_stack([d.X, dummies(unit, False), dummies(year, True)])
    coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
    np.testing.assert_allclose(t.coef, coef[:2], atol=1e-8)
    assert t.k_absorbed == 4 + 4 - 1
    # the slope block of the dummy-regression sandwich is the FE covariance
    e = y - Z @ coef
    full = sandwich(Z, e, unit, Z.shape[1])
    np.testing.assert_allclose(t.cov, full[:2, :2], atol=1e-8)


def test_cr1_hand_computation_two_clusters():
    X = np.array([[1.0, 0.5], [1.0, -1.0], [1.0, 2.0], [1.0, 0.0], [1.0, 1.5], [1.0, -0.5]])
    y = np.array([1.0, -0.5, 3.0, 0.7, 2.2, 0.1])
    cl = np.array([0, 0, 0, 1, 1, 1])
    t = ols_fe(DesignMatrix(("c", "x"), X, cluster=cl), y)
    # closed form by hand
    XtX = X.T @ X
    b = np.linalg.solve(XtX, X.T @ y)
    e = y - X @ b
    s0 = X[:3].T @ e[:3]
    s1 = X[3:].T @ e[3:]
    inv = np.linalg.inv(XtX)
    V = (2 / 1) * (5 / 4) * inv @ (np.outer(s0, s0) + np.outer(s1, s1)) @ inv
    np.testing.assert_allclose(t.coef, b, atol=1e-12)
    np.testing.assert_allclose(t.cov, V, atol=1e-10)
    assert t.df_resid == 1


def test_cluster_per_row_is_hc1():
    r = np.random.default_rng(4)
    n = 40
    X = np.column_stack([np.ones(n), r.standard_normal((n, 2))])
    y = X @ [1.0, 2.0, -1.0] + r.standard_normal(n) * (1 + np.abs(X[:, 1]))
    t = ols_fe(DesignMatrix(("c", "a", "b"), X, cluster=np.arange(n)), y)
    b = np.linalg.lstsq(X, y, rcond=None)[0]
    e = y - X @ b
    inv = np.linalg.inv(X.T @ X)
    hc1 = n / (n - 3) * inv @ (X.T * e ** 2) @ X @ inv
    np.testing.assert_allclose(t.cov, hc1, atol=1e-10)


def test_residual_orthogonality_and_psd():
    d, y, *_ = fe_instance(2, 10, 8, 3)
    t = ols_fe(d, y)
    Xd = Absorber(d.absorb).transform(d.X)
    np.testing.assert_allclose(Xd.T @ t.resid, 0.0, atol=1e-8)
    np.testing.assert_allclose(t.cov, t.cov.T, atol=1e-12)
    assert np.linalg.eigvalsh(t.cov).min() > -1e-10
    np.testing.assert_allclose(t.se, np.sqrt(np.diag(t.cov)))


def test_scaling_a_column():
    d, y, *_ = fe_instance(3, 8, 6, 2)
    t1 = ols_fe(d, y)
    X = d.X.copy()
    X[:, 1] *= 7.0
    t2 = ols_fe(DesignMatrix(d.names, X, d.cluster, d.absorb), y)
    assert t2.coef[1] == pytest.approx(t1.coef[1] / 7.0, rel=1e-10)
    np.testing.assert_allclose(t2.tvalues, t1.tvalues, atol=1e-8)


def test_absorber_converges_unbalanced():
    r = np.random.default_rng(5)
    a = r.integers(0, 12, 300)
    b = r.integers(0, 9, 300)
    raw = r.standard_normal((300, 2)) * 100
    M = Absorber((a, b)).transform(raw)
    # tolerance is relative to the largest input magnitude
    scale = np.abs(raw).max()
    for g in (a, b):
        for k in np.unique(g):
            assert np.abs(M[g == k].mean(0)).max() < 1e-10 * scale


def test_collinear_column_named():
    d, y, unit, year = fe_instance(6, 5, 5, 2)
    X = np.column_stack([d.X, d.X[:, 0] * 2 - d.X[:, 1]])
    with pytest.raises(CollinearDesign) as err:
        ols_fe(DesignMatrix(("x0", "x1", "dup"), X, d.cluster, d.absorb), y)
    assert err.value.column in ("x0", "x1", "dup")
    # a unit-constant column vanishes under the within transform
    with pytest.raises(CollinearDesign):
        ols_fe(DesignMatrix(("x0", "u"), np.column_stack([d.X[:, 0], unit * 1.0]), d.cluster, d.absorb), y)


def test_too_few_clusters():
    X = np.ones((5, 1))
    with pytest.raises(TooFewClusters):
        ols_fe(DesignMatrix(("c",), X, cluster=np.zeros(5)), np.arange(5.0))


def test_lincom_identity_and_sum():
    d, y, *_ = fe_instance(7, 10, 6, 2)
    t = ols_fe(d, y)
    one = lincom(t, {"x1": 1.0})
    assert one.estimate == t["x1"]
    assert one.se == pytest.approx(t.se[1], rel=1e-14)
    assert one.p == pytest.approx(2 * stats.t.sf(abs(one.t), t.n_clusters - 1))
    with pytest.raises(UnknownCoefficient):
        lincom(t, {"nope": 1.0})
    # zero off-diagonal: se adds in squares
    t0 = type(t)(t.names, t.coef, np.diag(np.diag(t.cov)), t.n, t.n_clusters, t.k_absorbed)
    s = lincom(t0, {"x0": 1.0, "x1": 1.0})
    assert s.se == pytest.approx(np.hypot(*t.se), rel=1e-14)


def test_lincom_matches_reparameterized_fit():
    d, y, *_ = fe_instance(8, 12, 6, 2)
    t = ols_fe(d, y)
    total = lincom(t, {"x0": 1.0, "x1": 1.0})
    # y = (b0 + b1) x0 + b1 (x1 - x0)
    X = np.column_stack([d.X[:, 0], d.X[:, 1] - d.X[:, 0]])
    t2 = ols_fe(DesignMatrix(("s", "d"), X, d.cluster, d.absorb), y)
    assert t2["s"] == pytest.approx(total.estimate, abs=1e-10)
    assert t2.se[0] == pytest.approx(total.se, rel=1e-8)


def test_wald_zero_and_t_squared():
    d, y, *_ = fe_instance(9, 10, 6, 3)
    t = ols_fe(d, y)
    w = wald_joint(t, [{"x0": 1.0}, {"x1": 1.0}], r=t.coef[:2])
    assert w.F == pytest.approx(0.0, abs=1e-20)
    assert w.p == pytest.approx(1.0)
    lc = lincom(t, {"x0": 1.0, "x2": -1.0})
    w1 = wald_joint(t, [{"x0": 1.0, "x2": -1.0}])
    assert w1.F == pytest.approx(lc.t ** 2, rel=1e-10)
    assert w1.p == pytest.approx(lc.p, rel=1e-8)


def test_wald_two_restrictions_by_hand():
    d, y, *_ = fe_instance(10, 10, 6, 3)
    t = ols_fe(d, y)
    R = np.array([[1.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    r = np.array([0.5, 2.0])
    w = wald_joint(t, R, r)
    diff = R @ t.coef - r
    A = R @ t.cov @ R.T
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    inv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det
    F = diff @ inv @ diff / 2
    assert w.F == pytest.approx(F, rel=1e-10)
    assert w.p == pytest.approx(stats.f.sf(F, 2, t.n_clusters - 1), rel=1e-10)
    assert (w.q, w.df_denom) == (2, 9)


def test_wald_singular():
    d, y, *_ = fe_instance(11, 10, 6, 2)
    t = ols_fe(d, y)
    with pytest.raises(SingularRestriction):
        wald_joint(t, np.array([[1.0, 0.0], [2.0, 0.0]]))
