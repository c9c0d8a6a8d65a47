"""Post-double-selection estimation.

Controls are chosen by one LASSO of the outcome on the candidate pool and one
LASSO of each treatment column on the same pool.  Absorbed effects and the
always-include block are partialled out before every LASSO (they are never
penalized), and the final model is OLS with absorbed effects on
``treatments + union of selections + always-include``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lasso
from .regress import Absorber, DesignMatrix, EstimateTable, ols_fe
from .smoother import worker_count

ALIAS_TOL = 1e-8

__all__ = ["LambdaRule", "PdsPlan", "StepReport", "PdsResult", "select_controls", "pds_estimate"]


@dataclass(frozen=True)
class LambdaRule:
    """Penalty selection: ``plugin`` (default), ``fixed`` or ``cv``."""

    kind: str = "plugin"
    value: float | None = None
    c: float = 1.1
    gamma: float | None = None
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("plugin", "fixed", "cv"):
            raise ValueError(f"unknown lambda rule {self.kind!r}")
        if self.kind == "fixed" and (self.value is None or self.value < 0):
            raise ValueError("fixed lambda rule needs a non-negative value")

    def label(self) -> str:
        if self.kind == "fixed":
            return f"fixed({self.value:g})"
        if self.kind == "cv":
            return f"cv({self.folds}-fold, 1se)"
        return f"plugin(c={self.c:g})"


@dataclass(frozen=True)
class PdsPlan:
    outcome: str
    treatments: tuple
    candidates: tuple = ()
    always_include: tuple = ()
    rule: LambdaRule = field(default_factory=LambdaRule)
    mode: str = "column"
    blocks: dict | None = None

    def __post_init__(self):
        t, c, a = set(self.treatments), set(self.candidates), set(self.always_include)
        if t & c or t & a or c & a:
            raise ValueError("treatment, candidate and always-include sets must be disjoint")
        if self.mode not in ("column", "block"):
            raise ValueError(f"unknown selection mode {self.mode!r}")

    def targets(self) -> list:
        """Columns that get their own selection step, outcome first."""
        if self.mode == "column" or not self.blocks:
            return list(self.treatments)
        reps = []
        for cols in self.blocks.values():
            cols = [c for c in cols if c in self.treatments]
            if cols:
                contemporaneous = [c for c in cols if c.endswith("[+0]")]
                reps.append((contemporaneous or cols)[0])
        return reps


@dataclass(frozen=True)
class StepReport:
    target: str
    lam: float
    rule: str
    selected: tuple


@dataclass(frozen=True)
class PdsResult:
    steps: tuple
    union: tuple
    table: EstimateTable
    aliased: tuple = ()

    def report(self) -> dict:
        return {
            "steps": [
                {"target": s.target, "lambda": s.lam, "rule": s.rule, "selected": list(s.selected)}
                for s in self.steps
            ],
            "union": list(self.union),
            "aliased": list(self.aliased),
        }


class _Selector:
    """Shared within-transformed, partialled candidate design for many targets."""

    def __init__(self, design: DesignMatrix, candidates, always=(), absorber=None):
        self.design = design
        self.candidates = tuple(candidates)
        self.absorber = absorber or Absorber(design.absorb)
        self._partial = None
        if always:
            A = self.absorber.transform(design.subset(always).X)
            q, r = np.linalg.qr(A)
            keep = np.abs(np.diag(r)) > 1e-10 * max(np.abs(np.diag(r)).max(), 1e-300)
            self._partial = q[:, keep]
        self.prep = None
        if self.candidates:
            C = self._clean(design.subset(self.candidates).X)
            self.prep = lasso.prepare(C, names=self.candidates)

    def _clean(self, M):
        M = self.absorber.transform(M)
        if self._partial is not None:
            M = M - self._partial @ (self._partial.T @ M)
        return M

    def select(self, y, rule: LambdaRule):
        if self.prep is None:
            return (), float("nan")
        y = self._clean(np.asarray(y, dtype=float))
        if rule.kind == "fixed":
            sol = lasso.fit_prepared(self.prep, y, rule.value)
        elif rule.kind == "cv":
            lam = lasso.cv_lambda(self.prep, y, folds=rule.folds, seed=rule.seed,
                                  groups=self.design.cluster)
            sol = lasso.fit_prepared(self.prep, y, lam)
        else:
            if np.allclose(y, 0.0, atol=1e-12 * max(1.0, float(np.abs(y).max()))):
                return (), float("inf")
            sol = lasso.fit_plugin(self.prep, y, c=rule.c, gamma=rule.gamma)
        return sol.active, sol.lam


def select_controls(design: DesignMatrix, target, candidates, rule: LambdaRule | None = None,
                    always=()) -> tuple:
    """Names of candidates with a nonzero LASSO coefficient for ``target``.

    ``target`` is a column name of ``design`` or a response array.
    """
    rule = rule or LambdaRule()
    if isinstance(target, str):
        if target in candidates:
            raise ValueError("target must not be among the candidates")
        target = design.column(target)
    sel, _ = _Selector(design, candidates, always).select(target, rule)
    return sel


def _aliased(design: DesignMatrix, fixed, optional, absorber: Absorber) -> list:
    """Optional columns lying in the span of ``fixed`` and earlier optional columns.

    Within-transformed columns are orthogonalized in order; a column whose
    remainder is below ``ALIAS_TOL`` of its own norm adds nothing to the
    fit and is reported instead of failing the regression.
    """
    if not optional:
        return []
    Z = absorber.transform(design.subset(list(fixed) + list(optional)).X)
    nf = len(fixed)
    basis = np.linalg.qr(Z[:, :nf])[0] if nf else np.empty((Z.shape[0], 0))
    out = []
    for j, name in enumerate(optional):
        x = Z[:, nf + j]
        norm = np.linalg.norm(x)
        r = x - basis @ (basis.T @ x)
        r = r - basis @ (basis.T @ r)
        rn = np.linalg.norm(r)
        if norm == 0 or rn <= ALIAS_TOL * norm:
            out.append(name)
        else:
            basis = np.column_stack([basis, r / rn])
    return out


def pds_estimate(plan: PdsPlan, design: DesignMatrix, y) -> PdsResult:
    """Run the selection steps and the final cluster-robust OLS."""
    y = np.asarray(y, dtype=float)
    selector = _Selector(design, plan.candidates, plan.always_include)
    targets = [(plan.outcome, y)] + [(t, design.column(t)) for t in plan.targets()]

    def run(item):
        name, vec = item
        sel, lam = selector.select(vec, plan.rule)
        return StepReport(name, lam, plan.rule.label(), tuple(sel))

    workers = worker_count()
    if workers > 1 and plan.candidates:
        with ThreadPoolExecutor(workers) as ex:
            steps = list(ex.map(run, targets))
    else:
        steps = [run(t) for t in targets]

    chosen = set().union(*(s.selected for s in steps)) if steps else set()
    union = tuple(c for c in plan.candidates if c in chosen)
    nuisance = list(plan.always_include) + list(union)
    aliased = _aliased(design, plan.treatments, nuisance, selector.absorber)
    kept = [c for c in nuisance if c not in set(aliased)]
    final = design.subset(list(plan.treatments) + kept)
    table = ols_fe(final, y)
    return PdsResult(tuple(steps), union, table, tuple(aliased))
