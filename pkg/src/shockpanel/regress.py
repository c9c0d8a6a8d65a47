"""Linear models with absorbed two-way effects and cluster-robust inference.

Fixed effects are swept out by alternating group demeaning, the reduced
problem is solved by column-pivoted QR, and the covariance is the CR1
cluster sandwich

    (G / (G - 1)) * ((n - 1) / (n - K)) * B^-1 M B^-1

with ``K`` counting both the explicit columns and the absorbed effects.
Tests use the t(G - 1) and F(q, G - 1) reference distributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy import stats
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    CollinearDesign,
    SingularRestriction,
    TooFewClusters,
    UnknownCoefficient,
)

__all__ = [
    "DesignMatrix",
    "EstimateTable",
    "LinCom",
    "WaldTest",
    "Absorber",
    "ols_fe",
    "lincom",
    "wald_joint",
    "restriction_matrix",
]

RANK_TOL = 1e-10
DEMEAN_TOL = 1e-10


def _codes(labels) -> tuple:
    uniq, inv = np.unique(np.asarray(labels), return_inverse=True)
    return inv.astype(np.int64), uniq.size


class Absorber:
    """Alternating-projection within transform over one or more groupings."""

    def __init__(self, groups: Sequence, tol: float = DEMEAN_TOL, max_iter: int = 10_000):
        self.tol = tol
        self.max_iter = max_iter
        self._ops = []
        for g in groups:
            codes, n_groups = _codes(g)
            n = codes.size
            onehot = sp.csr_matrix((np.ones(n), (codes, np.arange(n))), shape=(n_groups, n))
            counts = np.bincount(codes, minlength=n_groups).astype(float)
            self._ops.append((codes, onehot, counts))
        self.iterations = 0

    @property
    def n_groups(self) -> list:
        return [op[2].size for op in self._ops]

    def dof(self) -> int:
        """Number of linearly independent absorbed effects."""
        if not self._ops:
            return 0
        if len(self._ops) == 1:
            return self.n_groups[0]
        total = sum(self.n_groups)
        if len(self._ops) > 2:
            # assumes a connected design; exact only for two groupings
            return total - (len(self._ops) - 1)
        # every connected component of the bipartite group graph loses one dof
        a, _, ca = self._ops[0]
        b, _, cb = self._ops[1]
        na, nb = ca.size, cb.size
        graph = sp.csr_matrix((np.ones(a.size), (a, b + na)), shape=(na + nb, na + nb))
        n_comp, _ = connected_components(graph, directed=False)
        return total - n_comp

    def _group_means(self, op, M):
        codes, onehot, counts = op
        return (onehot @ M) / counts[:, None]

    def transform(self, M) -> np.ndarray:
        M = np.array(M, dtype=float, copy=True)
        squeeze = M.ndim == 1
        if squeeze:
            M = M[:, None]
        if not self._ops:
            return M[:, 0] if squeeze else M
        scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
        for it in range(1, self.max_iter + 1):
            for op in self._ops:
                M -= self._group_means(op, M)[op[0]]
            # the last projection is exact; check the remaining groupings
            worst = max(
                (float(np.max(np.abs(self._group_means(op, M)))) if M.size else 0.0)
                for op in self._ops[:-1]
            ) if len(self._ops) > 1 else 0.0
            if worst < self.tol * scale:
                break
        self.iterations = it
        return M[:, 0] if squeeze else M


@dataclass(frozen=True)
class DesignMatrix:
    """Regressor block with cluster ids and absorbed-effect labels per row."""

    names: tuple
    X: np.ndarray
    cluster: np.ndarray
    absorb: tuple = ()
    rows: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        names = tuple(self.names)
        if X.shape[1] != len(names):
            raise ValueError("column names do not match the design width")
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        if np.isnan(X).any():
            raise ValueError("design contains missing cells")
        if len(self.cluster) != X.shape[0]:
            raise ValueError("every row needs a cluster id")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "absorb", tuple(np.asarray(a) for a in self.absorb))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]

    def subset(self, names: Sequence[str]) -> "DesignMatrix":
        idx = [self.names.index(n) for n in names]
        return DesignMatrix(tuple(names), self.X[:, idx], self.cluster, self.absorb, self.rows)


class LinCom(NamedTuple):
    estimate: float
    se: float
    t: float
    p: float


class WaldTest(NamedTuple):
    F: float
    p: float
    q: int
    df_denom: int


def _t_p(t, df):
    with np.errstate(invalid="ignore"):
        return 2.0 * stats.t.sf(np.abs(t), df)


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    out = np.where((den == 0) & (num == 0), np.nan, out)
    return out


@dataclass(frozen=True)
class EstimateTable:
    names: tuple
    coef: np.ndarray
    cov: np.ndarray
    n: int
    n_clusters: int
    k_absorbed: int
    resid: np.ndarray = field(repr=False, default=None)

    @property
    def df_resid(self) -> int:
        """Degrees of freedom of the reference distributions, ``G - 1``."""
        return self.n_clusters - 1

    @property
    def k(self) -> int:
        return len(self.names) + self.k_absorbed

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))

    @property
    def tvalues(self) -> np.ndarray:
        return _ratio(self.coef, self.se)

    @property
    def pvalues(self) -> np.ndarray:
        return _t_p(self.tvalues, self.df_resid)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownCoefficient(f"no coefficient named {name!r}") from None

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.index(name)])

    def weights(self, w) -> np.ndarray:
        """Dense weight vector from a ``{name: weight}`` mapping or array."""
        if isinstance(w, Mapping):
            vec = np.zeros(len(self.names))
            for name, val in w.items():
                vec[self.index(name)] += val
            return vec
        vec = np.asarray(w, dtype=float)
        if vec.shape != (len(self.names),):
            raise ValueError("weight vector has the wrong length")
        return vec

    def summary(self) -> list:
        se, t, p = self.se, self.tvalues, self.pvalues
        return [
            dict(name=n, coef=float(b), se=float(s), t=float(tt), p=float(pp))
            for n, b, s, tt, pp in zip(self.names, self.coef, se, t, p)
        ]


def ols_fe(design: DesignMatrix, y, absorb: bool = True) -> EstimateTable:
    """Least squares with absorbed effects and CR1 cluster-robust covariance.

    Parameters
    ----------
    design : DesignMatrix
        Explicit regressors plus cluster ids and the effect labels to absorb.
    y : array_like
        Response, one value per design row.
    absorb : bool
        Sweep out ``design.absorb`` groupings before solving.
    """
    y = np.asarray(y, dtype=float)
    n, p = design.X.shape
    if y.shape != (n,):
        raise ValueError("response length does not match the design")
    if np.isnan(y).any():
        raise ValueError("response contains missing values")
    ccodes, G = _codes(design.cluster)
    if G < 2:
        raise TooFewClusters(f"need at least 2 clusters, got {G}")

    absorber = Absorber(design.absorb if absorb else ())
    k_abs = absorber.dof()
    if n < p + k_abs:
        raise CollinearDesign(f"{n} rows cannot identify {p} columns and {k_abs} absorbed effects")
    Z = absorber.transform(np.column_stack([y, design.X]))
    yd, Xd = Z[:, 0], Z[:, 1:]

    Q, R, piv = scipy.linalg.qr(Xd, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if p and diag[0] == 0:
        raise CollinearDesign(f"column {design.names[piv[0]]!r} is zero after absorption",
                              design.names[piv[0]])
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if p else 0
    if rank < p:
        bad = design.names[piv[rank]]
        raise CollinearDesign(f"column {bad!r} is collinear with the rest of the design", bad)

    beta = np.empty(p)
    beta[piv] = scipy.linalg.solve_triangular(R, Q.T @ yd)
    resid = yd - Xd @ beta

    Rinv = scipy.linalg.solve_triangular(R, np.eye(p))
    bread = np.empty((p, p))
    bread_piv = Rinv @ Rinv.T
    bread[np.ix_(piv, piv)] = bread_piv

    onehot = sp.csr_matrix((np.ones(n), (ccodes, np.arange(n))), shape=(G, n))
    scores = onehot @ (Xd * resid[:, None])
    meat = scores.T @ scores
    K = p + k_abs
    factor = G / (G - 1) * (n - 1) / (n - K) if n > K else np.inf
    cov = factor * bread @ meat @ bread
    cov = 0.5 * (cov + cov.T)
    return EstimateTable(design.names, beta, cov, n, G, k_abs, resid)


def lincom(table: EstimateTable, weights) -> LinCom:
    """Estimate, se, t and two-sided p of ``w' beta`` against zero."""
    w = table.weights(weights)
    est = float(w @ table.coef)
    se = float(np.sqrt(max(w @ table.cov @ w, 0.0)))
    t = float(_ratio(est, se))
    return LinCom(est, se, t, float(_t_p(t, table.df_resid)))


def restriction_matrix(table: EstimateTable, rows: Sequence) -> np.ndarray:
    """Stack ``{name: weight}`` mappings into a restriction matrix."""
    return np.vstack([table.weights(r) for r in rows])


def wald_joint(table: EstimateTable, R, r=None) -> WaldTest:
    """F test of ``R beta = r`` with the cluster covariance.

    ``R`` is a ``(q, p)`` matrix or a sequence of ``{name: weight}`` rows.
    """
    if not isinstance(R, np.ndarray):
        R = restriction_matrix(table, R)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    q = R.shape[0]
    r = np.zeros(q) if r is None else np.asarray(r, dtype=float)
    if np.linalg.matrix_rank(R) < q:
        raise SingularRestriction("restriction matrix is not of full row rank")
    d = R @ table.coef - r
    V = R @ table.cov @ R.T
    V = 0.5 * (V + V.T)
    eig = np.linalg.eigvalsh(V)
    if eig[0] <= 1e-12 * max(eig[-1], 0.0) or eig[-1] <= 0:
        raise SingularRestriction("R Sigma R' is singular")
    F = float(d @ np.linalg.solve(V, d) / q)
    p = float(stats.f.sf(F, q, table.df_resid))
    return WaldTest(F, p, q, table.df_resid)
