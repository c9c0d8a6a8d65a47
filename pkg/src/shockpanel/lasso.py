"""Coordinate-descent LASSO with per-column penalty loadings.

Objective::

    (1 / 2n) * ||y - X b||^2 + lam * sum_j psi_j * |b_j|

Penalized columns are standardized internally (mean 0, unit variance);
columns with ``psi_j = 0`` are never penalized and receive exact
least-squares coordinate steps.  Coefficients are reported on both the
standardized and the original scale.

The solver works on the Gram matrix ``X'X / n`` and keeps the gradient
``X'(y - X b) / n`` up to date, so a sweep over coordinates that stay at zero
costs O(p) and a design can be shared across many responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from scipy.stats import norm

from .exceptions import NotConverged

__all__ = [
    "soft_threshold",
    "LassoProblem",
    "LassoSolution",
    "PreparedDesign",
    "prepare",
    "fit",
    "fit_prepared",
    "kkt_residuals",
    "lambda_max",
    "plugin_lambda",
    "fit_plugin",
    "cv_lambda",
]


def soft_threshold(z, gamma):
    """``sign(z) * max(|z| - gamma, 0)``."""
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("threshold must be non-negative")
    out = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@numba.njit(cache=True)
def _objective(beta, c, grad, penalty, yy_n):
    # b'Gb = b'(c - grad), so loss = (yy - b'c - b'grad) / 2
    lin = 0.0
    pen = 0.0
    for j in range(beta.size):
        lin += beta[j] * (c[j] + grad[j])
        pen += penalty[j] * abs(beta[j])
    return 0.5 * (yy_n - lin) + pen


@numba.njit(cache=True)
def _cd_gram(G, c, penalty, beta, yy_n, tol, max_sweeps):
    p = beta.size
    grad = c - G @ beta
    hist = np.empty(max_sweeps + 1)
    hist[0] = _objective(beta, c, grad, penalty, yy_n)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        max_delta = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            z = grad[j] + gjj * beta[j]
            lam = penalty[j]
            if lam == 0.0:
                new = z / gjj
            elif z > lam:
                new = (z - lam) / gjj
            elif z < -lam:
                new = (z + lam) / gjj
            else:
                new = 0.0
            delta = new - beta[j]
            if delta != 0.0:
                beta[j] = new
                for k in range(p):
                    grad[k] -= G[k, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        hist[sweeps] = _objective(beta, c, grad, penalty, yy_n)
        if max_delta < tol:
            converged = True
            break
    return sweeps, converged, hist[: sweeps + 1]


@dataclass(frozen=True)
class PreparedDesign:
    """Standardized design and its Gram matrix, reusable across responses."""

    Xs: np.ndarray
    gram: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    loadings: np.ndarray
    usable: np.ndarray
    fit_intercept: bool
    names: tuple

    @property
    def n(self) -> int:
        return self.Xs.shape[0]

    @property
    def p(self) -> int:
        return self.Xs.shape[1]

    @property
    def penalized(self) -> np.ndarray:
        return self.loadings > 0


def prepare(X, loadings=None, fit_intercept: bool = True, names: Sequence[str] | None = None) -> PreparedDesign:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ValueError("need a 2-d design with n >= 2 rows and at least one column")
    n, p = X.shape
    psi = np.ones(p) if loadings is None else np.asarray(loadings, dtype=float).copy()
    if psi.shape != (p,) or np.any(psi < 0) or not np.all(np.isfinite(psi)):
        raise ValueError("loadings must be finite, non-negative, one per column")
    mean = X.mean(axis=0) if fit_intercept else np.zeros(p)
    Xc = X - mean
    scale = np.ones(p)
    sd = np.sqrt((Xc * Xc).mean(axis=0))
    pen = psi > 0
    scale[pen] = sd[pen]
    usable = sd > 1e-12 * max(1.0, float(np.max(np.abs(X))))
    scale[~usable] = 1.0
    Xs = Xc / scale
    Xs[:, ~usable] = 0.0
    gram = Xs.T @ Xs / n
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(p))
    return PreparedDesign(Xs, gram, mean, scale, psi, usable, fit_intercept, names)


@dataclass(frozen=True)
class LassoProblem:
    X: np.ndarray
    y: np.ndarray
    lam: float
    loadings: np.ndarray | None = None
    fit_intercept: bool = True
    names: tuple | None = None


@dataclass(frozen=True)
class LassoSolution:
    coef: np.ndarray
    coef_std: np.ndarray
    intercept: float
    lam: float
    objective: float
    history: np.ndarray
    n_sweeps: int
    active: tuple
    active_index: np.ndarray
    converged: bool = True
    loadings: np.ndarray | None = None


def _center(prep: PreparedDesign, y):
    y = np.asarray(y, dtype=float)
    if y.shape != (prep.n,):
        raise ValueError("response length does not match the design")
    ybar = y.mean() if prep.fit_intercept else 0.0
    return y - ybar, ybar


def fit_prepared(prep: PreparedDesign, y, lam: float, tol: float = 1e-10,
                 max_sweeps: int = 100_000, warm_start=None, loadings=None) -> LassoSolution:
    """Solve at penalty ``lam``; ``loadings`` overrides the prepared ones."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    psi = prep.loadings if loadings is None else np.asarray(loadings, dtype=float)
    if psi.shape != (prep.p,) or np.any(psi < 0):
        raise ValueError("loadings must be non-negative, one per column")
    yc, ybar = _center(prep, y)
    n = prep.n
    c = prep.Xs.T @ yc / n
    beta = np.zeros(prep.p) if warm_start is None else np.array(warm_start, dtype=float)
    penalty = lam * psi
    sweeps, converged, hist = _cd_gram(
        prep.gram, c, penalty, beta, float(yc @ yc / n), float(tol), int(max_sweeps)
    )
    beta[~prep.usable] = 0.0
    coef = beta / prep.scale
    intercept = float(ybar - prep.mean @ coef) if prep.fit_intercept else 0.0
    act = np.flatnonzero((beta != 0) & prep.penalized)
    sol = LassoSolution(
        coef=coef,
        coef_std=beta,
        intercept=intercept,
        lam=float(lam),
        objective=float(hist[-1]),
        history=hist,
        n_sweeps=int(sweeps),
        active=tuple(prep.names[j] for j in act),
        active_index=act,
        converged=bool(converged),
        loadings=psi,
    )
    if not converged:
        raise NotConverged(f"no convergence within {max_sweeps} sweeps", sol)
    return sol


def fit(problem: LassoProblem, tol: float = 1e-10, max_sweeps: int = 100_000) -> LassoSolution:
    """Solve one LASSO problem by cyclic coordinate descent."""
    prep = prepare(problem.X, problem.loadings, problem.fit_intercept, problem.names)
    return fit_prepared(prep, problem.y, problem.lam, tol, max_sweeps)


def kkt_residuals(prep: PreparedDesign, y, sol: LassoSolution) -> np.ndarray:
    """Per-column KKT violation on the standardized scale (zero at an exact optimum)."""
    yc, _ = _center(prep, y)
    g = prep.Xs.T @ (yc - prep.Xs @ sol.coef_std) / prep.n
    bound = sol.lam * (prep.loadings if sol.loadings is None else sol.loadings)
    b = sol.coef_std
    viol = np.where(
        b != 0,
        np.abs(g - bound * np.sign(b)),
        np.maximum(np.abs(g) - bound, 0.0),
    )
    viol[~prep.usable] = 0.0
    return viol


def _unpenalized_residual(prep: PreparedDesign, yc):
    free = ~prep.penalized & prep.usable
    if not free.any():
        return yc
    Z = prep.Xs[:, free]
    coef, *_ = np.linalg.lstsq(Z, yc, rcond=None)
    return yc - Z @ coef


def lambda_max(prep: PreparedDesign, y) -> float:
    """Smallest penalty level at which every penalized coefficient is zero."""
    yc, _ = _center(prep, y)
    r = _unpenalized_residual(prep, yc)
    pen = prep.penalized & prep.usable
    if not pen.any():
        return 0.0
    g = np.abs(prep.Xs[:, pen].T @ r) / prep.n
    return float(np.max(g / prep.loadings[pen]))


def plugin_lambda(n: int, p: int, sigma: float, c: float = 1.1, gamma: float | None = None) -> float:
    """Plug-in penalty ``c * sigma * Phi^-1(1 - gamma / (2p)) / sqrt(n)``.

    ``gamma`` defaults to ``0.1 / log(max(n, p))``.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if gamma is None:
        gamma = 0.1 / math.log(max(n, p, 3))
    return float(c * sigma * norm.ppf(1.0 - gamma / (2.0 * p)) / math.sqrt(n))


def _post_lasso_sigma(prep: PreparedDesign, yc, sol: LassoSolution) -> float:
    keep = np.flatnonzero(((sol.coef_std != 0) | ~prep.penalized) & prep.usable)
    if keep.size:
        Z = prep.Xs[:, keep]
        coef, *_ = np.linalg.lstsq(Z, yc, rcond=None)
        r = yc - Z @ coef
    else:
        r = yc
    dof = prep.n - keep.size - int(prep.fit_intercept)
    return float(np.sqrt(r @ r / max(dof, 1)))


def fit_plugin(prep: PreparedDesign, y, c: float = 1.1, gamma: float | None = None,
               n_iter: int = 2, tol: float = 1e-10) -> LassoSolution:
    """LASSO at the plug-in penalty, re-estimating sigma from post-LASSO residuals.

    The initial sigma is the standard deviation of ``y`` net of the
    unpenalized columns; it is then refreshed ``n_iter`` times.
    """
    yc, _ = _center(prep, y)
    r = _unpenalized_residual(prep, yc)
    sigma = float(np.sqrt(r @ r / max(prep.n - 1, 1)))
    p_pen = max(int((prep.penalized & prep.usable).sum()), 1)
    if sigma == 0:
        # response fully explained by the unpenalized block
        return fit_prepared(prep, y, lambda_max(prep, y) + 1.0, tol)
    sol = fit_prepared(prep, y, plugin_lambda(prep.n, p_pen, sigma, c, gamma), tol)
    for _ in range(n_iter):
        sigma = _post_lasso_sigma(prep, yc, sol)
        if sigma <= 0:
            break
        sol = fit_prepared(prep, y, plugin_lambda(prep.n, p_pen, sigma, c, gamma), tol,
                           warm_start=sol.coef_std)
    return sol


def cv_lambda(prep: PreparedDesign, y, folds: int = 5, n_lambdas: int = 40,
              ratio: float = 1e-3, seed: int = 0, one_se: bool = True, groups=None) -> float:
    """K-fold cross-validated penalty (1-SE rule by default).

    ``groups`` keeps all rows of a group in the same fold (e.g. panel units).
    """
    yc, _ = _center(prep, y)
    lmax = lambda_max(prep, y)
    if lmax == 0:
        return 0.0
    grid = lmax * np.logspace(0, math.log10(ratio), n_lambdas)
    rng = np.random.default_rng(seed)
    if groups is None:
        fold = rng.permutation(prep.n) % folds
    else:
        uniq, inv = np.unique(np.asarray(groups), return_inverse=True)
        fold = (rng.permutation(uniq.size) % folds)[inv]
    mse = np.empty((folds, n_lambdas))
    for f in range(folds):
        tr, te = fold != f, fold == f
        sub = PreparedDesign(prep.Xs[tr], prep.Xs[tr].T @ prep.Xs[tr] / tr.sum(), prep.mean,
                             prep.scale, prep.loadings, prep.usable, False, prep.names)
        ytr = yc[tr] - yc[tr].mean()
        warm = None
        for i, lam in enumerate(grid):
            sol = fit_prepared(sub, ytr, lam, 1e-8, warm_start=warm)
            warm = sol.coef_std
            pred = prep.Xs[te] @ sol.coef_std + yc[tr].mean()
            mse[f, i] = np.mean((yc[te] - pred) ** 2)
    avg = mse.mean(axis=0)
    best = int(np.argmin(avg))
    if not one_se:
        return float(grid[best])
    se = mse.std(axis=0, ddof=1)[best] / math.sqrt(folds)
    ok = np.flatnonzero(avg <= avg[best] + se)
    return float(grid[ok.min()])
