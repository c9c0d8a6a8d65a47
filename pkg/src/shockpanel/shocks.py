"""Regular-flow / shock classification around the smoother and descriptives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import AlignmentError
from .panel import PanelDataset, SeriesView
from .smoother import SmootherResult, stack_results

__all__ = [
    "FlowLabel",
    "FlowClass",
    "ClassSummary",
    "DescriptiveTable",
    "classify",
    "classify_panel",
    "descriptives",
    "exclusion_scores",
    "exclusion_mask",
]

# Deltas this close to the band edge (relative to the series scale) are ties.
_TIE_RTOL = 64 * np.finfo(float).eps


class FlowLabel(str, Enum):
    REGULAR = "Regular"
    POSITIVE = "PositiveShock"
    NEGATIVE = "NegativeShock"

    @property
    def code(self) -> int:
        return {"Regular": 0, "PositiveShock": 1, "NegativeShock": -1}[self.value]

    @classmethod
    def from_code(cls, code: int) -> "FlowLabel":
        return {0: cls.REGULAR, 1: cls.POSITIVE, -1: cls.NEGATIVE}[int(code)]


@dataclass(frozen=True)
class FlowClass:
    """Labels for a set of unit-year observations at threshold ``k``.

    ``codes`` is +1 for a positive shock, -1 for a negative shock and 0 for a
    regular flow.  Observations with a missing value have ``classified``
    False, code 0 and a NaN delta.
    """

    unit: np.ndarray
    year: np.ndarray
    delta: np.ndarray
    se: np.ndarray
    codes: np.ndarray
    k: float
    classified: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.classified is None:
            object.__setattr__(self, "classified", ~np.isnan(self.delta))

    def __len__(self):
        return self.codes.size

    @property
    def positive(self) -> np.ndarray:
        return (self.codes == 1) & self.classified

    @property
    def negative(self) -> np.ndarray:
        return (self.codes == -1) & self.classified

    @property
    def regular(self) -> np.ndarray:
        return (self.codes == 0) & self.classified

    def labels(self) -> list:
        return [FlowLabel.from_code(c).value if ok else "" for c, ok in zip(self.codes, self.classified)]

    def shares(self) -> dict:
        n = int(self.classified.sum())
        return {
            FlowLabel.REGULAR.value: self.regular.sum() / n,
            FlowLabel.POSITIVE.value: self.positive.sum() / n,
            FlowLabel.NEGATIVE.value: self.negative.sum() / n,
        }


def _label(values, fitted, se, k):
    delta = values - fitted
    scale = np.maximum(np.abs(values), np.abs(fitted))
    scale = np.nanmax(scale) if np.any(np.isfinite(scale)) else 1.0
    band = k * se + _TIE_RTOL * max(scale, 1.0)
    codes = np.zeros(delta.shape, dtype=np.int8)
    codes[delta > band] = 1
    codes[delta < -band] = -1
    codes[np.isnan(delta)] = 0
    return delta, codes


def classify(series: SeriesView, smoother: SmootherResult, k: float = 3.0) -> FlowClass:
    """Label each year of one unit: outside ``+-k*se`` is a shock, ties are regular."""
    if not k > 0:
        raise ValueError("k must be positive")
    if series.unit != smoother.unit or not np.array_equal(series.years, smoother.years):
        raise AlignmentError(f"series and smoother for unit {series.unit} are not aligned")
    delta, codes = _label(series.values, smoother.fitted, smoother.se, k)
    return FlowClass(
        unit=np.full(len(series), series.unit, dtype=object),
        year=np.asarray(series.years),
        delta=delta,
        se=np.asarray(smoother.se),
        codes=codes,
        k=float(k),
    )


def classify_panel(panel: PanelDataset, name: str, results: dict, k: float = 3.0) -> FlowClass:
    """Row-aligned classification of a whole panel."""
    if not k > 0:
        raise ValueError("k must be positive")
    fitted, se = stack_results(panel, results)
    # per-unit tie tolerance, same as classify()
    delta = np.empty(panel.n_rows)
    codes = np.empty(panel.n_rows, dtype=np.int8)
    values = panel[name]
    for unit in panel.units:
        rows = panel.unit_rows(unit)
        delta[rows], codes[rows] = _label(values[rows], fitted[rows], se[rows], k)
    return FlowClass(
        unit=panel.unit_ids, year=np.asarray(panel.year), delta=delta, se=se, codes=codes, k=float(k)
    )


@dataclass(frozen=True)
class ClassSummary:
    count: int
    mean: float
    sd: float
    min: float
    max: float

    @property
    def defined(self) -> bool:
        return self.count > 0

    @classmethod
    def of(cls, x) -> "ClassSummary":
        x = np.asarray(x, dtype=float)
        x = x[~np.isnan(x)]
        if x.size == 0:
            return cls(0, math.nan, math.nan, math.nan, math.nan)
        sd = float(np.std(x, ddof=1)) if x.size > 1 else math.nan
        return cls(int(x.size), float(x.mean()), sd, float(x.min()), float(x.max()))


@dataclass(frozen=True)
class DescriptiveTable:
    """Per-class moments of the deviation from the smoother.

    ``rows[label][measure]`` with measures ``delta`` (thousand CHF),
    ``pct_spending`` and ``pct_revenue``.  Negative-shock rows report
    ``smoother - value`` so magnitudes are positive.
    """

    rows: dict
    total: int

    def count(self, label) -> int:
        return self.rows[FlowLabel(label).value]["delta"].count

    def as_records(self) -> list:
        out = []
        for label, measures in self.rows.items():
            for measure, s in measures.items():
                out.append(dict(label=label, measure=measure, count=s.count, mean=s.mean,
                                sd=s.sd, min=s.min, max=s.max))
        return out


def descriptives(
    panel: PanelDataset,
    classes: FlowClass,
    spending: str = "current_expenditures",
    revenue: str = "current_revenue",
) -> DescriptiveTable:
    if len(classes) != panel.n_rows:
        raise AlignmentError("classification is not row-aligned with the panel")
    spend = panel[spending]
    rev = panel[revenue]
    rows = {}
    for label, mask, sign in (
        (FlowLabel.REGULAR, classes.regular, 1.0),
        (FlowLabel.POSITIVE, classes.positive, 1.0),
        (FlowLabel.NEGATIVE, classes.negative, -1.0),
    ):
        d = sign * classes.delta[mask]
        rows[label.value] = {
            "delta": ClassSummary.of(d),
            "pct_spending": ClassSummary.of(d / spend[mask] * 100.0),
            "pct_revenue": ClassSummary.of(d / rev[mask] * 100.0),
        }
    return DescriptiveTable(rows, int(classes.classified.sum()))


def exclusion_scores(panel: PanelDataset, results: dict, spending: str = "current_expenditures",
                     band: float = 3.0) -> dict:
    """Per-unit mean lower band ``fitted - band*se`` and mean smoother share of spending."""
    lower, share = {}, {}
    for unit in panel.units:
        r = results[unit]
        rows = panel.unit_rows(unit)
        lower[unit] = float(np.mean(r.fitted - band * r.se))
        share[unit] = float(np.mean(r.fitted) / np.nanmean(panel[spending][rows]))
    return {"lower_bound": lower, "share": share}


def _lowest(scores: dict, fraction: float) -> set:
    n_out = max(1, int(math.floor(fraction * len(scores) + 1e-9)))
    ranked = sorted(scores, key=lambda u: (scores[u], u))
    return set(ranked[:n_out])


def exclusion_mask(
    panel: PanelDataset,
    results: dict,
    rule: str = "union",
    fraction: float = 0.1,
    spending: str = "current_expenditures",
) -> set:
    """Units in the lowest decile of the mean lower band and/or the smoother share.

    ``rule`` is ``"lower_bound"``, ``"share"``, ``"union"`` or
    ``"intersection"``.  Ties are broken by unit id.
    """
    scores = exclusion_scores(panel, results, spending)
    lo = _lowest(scores["lower_bound"], fraction)
    sh = _lowest(scores["share"], fraction)
    if rule == "lower_bound":
        return lo
    if rule == "share":
        return sh
    if rule == "union":
        return lo | sh
    if rule == "intersection":
        return lo & sh
    raise ValueError(f"unknown exclusion rule {rule!r}")
