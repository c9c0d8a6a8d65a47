"""Distributed-lag shock model: design construction, estimation, robustness.

For every ``tau`` in ``-leads..lags`` the design holds the revenue series,
the two shock dummies, their interactions with the revenue series and the
smoother, each shifted so that row ``t`` sees the value from ``t - tau``
(negative ``tau`` are anticipation leads).  Unit and year effects are
absorbed and errors clustered by unit.

Reported total impacts per ``tau``:

* regular flow: ``b[tau]``
* positive shock: ``b[tau] + s[tau]``
* negative shock: ``b[tau] + r[tau]``

where ``s``/``r`` are the coefficients on the positive/negative interactions.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from .panel import PanelDataset, listwise_complete
from .pds import LambdaRule, PdsPlan, PdsResult, pds_estimate
from .regress import DesignMatrix, lincom, wald_joint
from .shocks import FlowClass, classify_panel, exclusion_mask
from .smoother import stack_results

__all__ = [
    "DlmSpec",
    "DlmDesign",
    "DlmOutput",
    "col",
    "build_design",
    "estimate",
    "robustness_suite",
    "REGIMES",
    "PAIRINGS",
]

REGIMES = ("regular", "positive", "negative")
PAIRINGS = ("positive_vs_regular", "negative_vs_regular", "positive_vs_negative")


def col(block: str, tau: int) -> str:
    """Column name of ``block`` at offset ``tau``, e.g. ``ipgt[+1]``."""
    return f"{block}[{tau:+d}]"


@dataclass(frozen=True)
class DlmSpec:
    outcome: str = "current_expenditures"
    base: str = "ipgt"
    leads: int = 2
    lags: int = 5
    k: float = 3.0
    candidates: tuple = ()
    unit_trends: bool = True
    interactions: bool = True
    smoother_block: bool = True
    exclude: frozenset = frozenset()
    rule: LambdaRule = field(default_factory=LambdaRule)
    selection_mode: str = "column"
    joint_lags: tuple = (1, 2, 3, 4)
    level: float = 0.95

    def __post_init__(self):
        if self.leads < 0 or self.lags < 0:
            raise ValueError("leads and lags must be non-negative")
        if self.outcome == self.base:
            raise ValueError("outcome and base series must differ")
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "exclude", frozenset(self.exclude))
        object.__setattr__(self, "joint_lags", tuple(self.joint_lags))

    @property
    def taus(self) -> list:
        return list(range(-self.leads, self.lags + 1))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["candidates"] = list(self.candidates)
        d["exclude"] = sorted(self.exclude)
        d["joint_lags"] = list(self.joint_lags)
        return d


@dataclass(frozen=True)
class DlmDesign:
    design: DesignMatrix
    y: np.ndarray
    treatments: tuple
    always: tuple
    candidates: tuple
    blocks: dict
    rows: np.ndarray


def _trend_columns(panel: PanelDataset, rows: np.ndarray) -> dict:
    # unit-specific linear and quadratic trends on a centred, rescaled year
    t = (panel.year - panel.year.mean()) / 10.0
    out = {}
    for i, unit in enumerate(panel.units):
        mine = panel.unit_index == i
        out[f"trend1:{unit}"] = np.where(mine, t, 0.0)
        out[f"trend2:{unit}"] = np.where(mine, t * t, 0.0)
    return out


def build_design(panel: PanelDataset, smoother: dict, classes: FlowClass, spec: DlmSpec) -> DlmDesign:
    """Materialize the distributed-lag regressors on the listwise-complete sample."""
    if abs(classes.k - spec.k) > 1e-12:
        raise ValueError(f"classes were computed at k={classes.k}, spec asks for k={spec.k}")
    base = panel[spec.base]
    fitted, _ = stack_results(panel, smoother)
    pos = np.where(classes.classified, classes.positive.astype(float), np.nan)
    neg = np.where(classes.classified, classes.negative.astype(float), np.nan)

    sources = {spec.base: base}
    treat_blocks = [spec.base]
    if spec.interactions:
        sources.update({
            "shock_pos": pos,
            "shock_neg": neg,
            f"{spec.base}_x_pos": base * pos,
            f"{spec.base}_x_neg": base * neg,
        })
        treat_blocks += ["shock_pos", "shock_neg", f"{spec.base}_x_pos", f"{spec.base}_x_neg"]
    always_blocks = ["smoother"] if spec.smoother_block else []
    if spec.smoother_block:
        sources["smoother"] = fitted
    for c in spec.candidates:
        sources[c] = panel[c]

    cols, blocks = {}, {}
    for block in treat_blocks + always_blocks + list(spec.candidates):
        blocks[block] = []
        for tau in spec.taus:
            name = col(block, tau)
            cols[name] = panel.lagged(sources[block], tau)
            blocks[block].append(name)
    treatments = tuple(n for b in treat_blocks for n in blocks[b])
    always = tuple(n for b in always_blocks for n in blocks[b])
    cand = [n for b in spec.candidates for n in blocks[b]]

    y_all = panel[spec.outcome]
    rows = listwise_complete(panel, [spec.outcome, *cols], extra=cols)
    if spec.exclude:
        rows = rows[~np.isin(panel.unit_ids[rows], list(spec.exclude))]
    if spec.unit_trends:
        trends = _trend_columns(panel, rows)
        present = set(panel.unit_ids[rows])
        for name, v in trends.items():
            if name.split(":", 1)[1] in present:
                cols[name] = v
                cand.append(name)

    names = treatments + always + tuple(cand)
    X = np.column_stack([cols[n][rows] for n in names]) if names else np.empty((rows.size, 0))
    unit = panel.unit_ids[rows]
    design = DesignMatrix(names, X, cluster=unit, absorb=(unit, panel.year[rows]), rows=rows)
    return DlmDesign(design, y_all[rows], treatments, always, tuple(cand), blocks, rows)


@dataclass(frozen=True)
class DlmOutput:
    variant: str
    outcome: str
    spec: DlmSpec
    rows: list
    pairwise: list
    joint_f: dict
    selection: dict
    n_obs: int
    n_clusters: int
    result: PdsResult = field(repr=False, compare=False, default=None)

    def impacts(self, regime: str) -> dict:
        return {r["tau"]: r["estimate"] for r in self.rows if r["regime"] == regime}

    def row(self, tau: int, regime: str) -> dict:
        for r in self.rows:
            if r["tau"] == tau and r["regime"] == regime:
                return r
        raise KeyError((tau, regime))

    def pair(self, tau: int, pairing: str) -> dict:
        for r in self.pairwise:
            if r["tau"] == tau and r["pairing"] == pairing:
                return r
        raise KeyError((tau, pairing))

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "outcome": self.outcome,
            "spec": self.spec.to_dict(),
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
            "rows": self.rows,
            "pairwise": self.pairwise,
            "jointF": self.joint_f,
            "selection_report": self.selection,
        }


def _impact_weights(spec: DlmSpec, tau: int) -> dict:
    b = col(spec.base, tau)
    if not spec.interactions:
        return {"pooled": {b: 1.0}}
    return {
        "regular": {b: 1.0},
        "positive": {b: 1.0, col(f"{spec.base}_x_pos", tau): 1.0},
        "negative": {b: 1.0, col(f"{spec.base}_x_neg", tau): 1.0},
    }


def _pair_weights(spec: DlmSpec, tau: int) -> dict:
    s = col(f"{spec.base}_x_pos", tau)
    r = col(f"{spec.base}_x_neg", tau)
    return {
        "positive_vs_regular": {s: 1.0},
        "negative_vs_regular": {r: 1.0},
        "positive_vs_negative": {s: 1.0, r: -1.0},
    }


def estimate(spec: DlmSpec, panel: PanelDataset, smoother: dict, classes: FlowClass,
             variant: str = "baseline") -> DlmOutput:
    """Post-double-selection fit of the distributed-lag model and derived tests."""
    d = build_design(panel, smoother, classes, spec)
    plan = PdsPlan(
        outcome=spec.outcome,
        treatments=d.treatments,
        candidates=d.candidates,
        always_include=d.always,
        rule=spec.rule,
        mode=spec.selection_mode,
        blocks={b: v for b, v in d.blocks.items() if v and v[0] in d.treatments},
    )
    res = pds_estimate(plan, d.design, d.y)
    table = res.table
    crit = float(stats.t.ppf(0.5 + spec.level / 2.0, table.df_resid))

    rows = []
    for tau in spec.taus:
        for regime, w in _impact_weights(spec, tau).items():
            lc = lincom(table, w)
            rows.append(dict(
                tau=tau, regime=regime, estimate=lc.estimate, se=lc.se,
                ci_lo=lc.estimate - crit * lc.se, ci_hi=lc.estimate + crit * lc.se,
                p_zero=lc.p,
            ))
    pairwise, joint = [], {}
    if spec.interactions:
        for tau in spec.taus:
            for pairing, w in _pair_weights(spec, tau).items():
                lc = lincom(table, w)
                pairwise.append(dict(tau=tau, pairing=pairing, estimate=lc.estimate,
                                     se=lc.se, t=lc.t, p=lc.p))
        lags = [t for t in spec.joint_lags if t in spec.taus]
        if lags:
            for pairing in PAIRINGS:
                R = [_pair_weights(spec, t)[pairing] for t in lags]
                wt = wald_joint(table, R)
                joint[pairing] = dict(F=wt.F, p=wt.p, q=wt.q, df_denom=wt.df_denom,
                                      lags=list(lags))
    return DlmOutput(
        variant=variant,
        outcome=spec.outcome,
        spec=spec,
        rows=rows,
        pairwise=pairwise,
        joint_f=joint,
        selection=res.report(),
        n_obs=table.n,
        n_clusters=table.n_clusters,
        result=res,
    )


def robustness_suite(panel: PanelDataset, smoother: dict, spec: DlmSpec,
                     exclusion_rule: str = "union", spending: str = "current_expenditures") -> dict:
    """Baseline plus low-receipt exclusion, k = 4 and 5, and ten lags."""
    def classes_at(k):
        return classify_panel(panel, spec.base, smoother, k)

    variants = {
        "baseline": spec,
        "exclude_low": replace(spec, exclude=exclusion_mask(panel, smoother, exclusion_rule, spending=spending)),
        "k4": replace(spec, k=4.0),
        "k5": replace(spec, k=5.0),
        "lags10": replace(spec, lags=10),
    }
    cache = {}
    out = {}
    for name, v in variants.items():
        if v.k not in cache:
            cache[v.k] = classes_at(v.k)
        out[name] = estimate(v, panel, smoother, cache[v.k], variant=name)
    return out
