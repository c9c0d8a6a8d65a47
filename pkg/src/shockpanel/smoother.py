"""Per-unit local linear trend of a revenue series.

The fit at each year ``t0`` is the intercept of a weighted least-squares line
of value on ``year - t0`` with Epanechnikov weights.  Because the fit is a
linear functional of the observations, it is computed through the
equivalent-kernel weights ``l_j(t0)``; the pointwise standard error is
``sigma * sqrt(sum_j l_j(t0)**2)`` with ``sigma**2 = RSS / (n - 2)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import AlignmentError, DegenerateDenominator, SingularLocalFit, TooFewObservations
from .panel import PanelDataset, SeriesView

__all__ = [
    "SmootherResult",
    "epanechnikov",
    "rot_bandwidth",
    "equivalent_kernel",
    "local_linear_fit",
    "smooth_panel",
    "stack_results",
    "preciseness",
    "worker_count",
]

MIN_OBS = 5
WIDEN_FACTOR = 1.5


def worker_count() -> int:
    """Worker cap from ``SHOCKPANEL_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SHOCKPANEL_THREADS", "1")))
    except ValueError:
        return 1


def epanechnikov(u):
    """``0.75 * (1 - u**2)`` on ``|u| < 1`` and zero elsewhere."""
    u = np.asarray(u, dtype=float)
    w = np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)
    return w if w.ndim else float(w)


def rot_bandwidth(years, values=None, min_bandwidth: float = 1.0) -> float:
    """Silverman's normal-reference bandwidth over the running variable.

    ``h = 0.9 * min(sd, IQR / 1.349) * n**(-1/5)`` computed on the years that
    carry a non-missing value, floored at ``min_bandwidth``.
    """
    t = np.asarray(years, dtype=float)
    if values is not None:
        t = t[~np.isnan(np.asarray(values, dtype=float))]
    n = t.size
    if n < MIN_OBS:
        raise TooFewObservations(f"bandwidth needs at least {MIN_OBS} observations, got {n}")
    sd = np.std(t, ddof=1)
    q75, q25 = np.percentile(t, [75, 25])
    spread = min(sd, (q75 - q25) / 1.349)
    h = 0.9 * spread * n ** (-0.2)
    return float(max(h, min_bandwidth))


def equivalent_kernel(t_obs, t_eval, h: float):
    """Equivalent-kernel weight matrix of the local linear smoother.

    Returns ``(L, h_eff)`` where ``L[i, j]`` maps observation ``j`` to the fit
    at ``t_eval[i]`` and ``h_eff[i]`` is the bandwidth actually used there
    (widened by 1.5x until two observations carry weight).
    """
    t_obs = np.asarray(t_obs, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if t_obs.size < 2:
        raise SingularLocalFit("local linear fit needs at least two observations")
    d = t_obs[None, :] - t_eval[:, None]
    h_eff = np.full(t_eval.size, float(h))
    while True:
        support = (np.abs(d) < h_eff[:, None]).sum(axis=1)
        thin = support < 2
        if not thin.any():
            break
        h_eff[thin] *= WIDEN_FACTOR
    w = epanechnikov(d / h_eff[:, None])
    s0 = w.sum(axis=1)
    s1 = (w * d).sum(axis=1)
    s2 = (w * d * d).sum(axis=1)
    det = s0 * s2 - s1 * s1
    if np.any(det <= 1e-12 * s0 * s2):
        raise SingularLocalFit("all weighted years coincide at some evaluation point")
    L = w * (s2[:, None] - d * s1[:, None]) / det[:, None]
    return L, h_eff


@dataclass(frozen=True)
class SmootherResult:
    unit: str
    years: np.ndarray
    fitted: np.ndarray
    se: np.ndarray
    bandwidth: float
    effective_bandwidth: np.ndarray
    sigma: float
    kernel: str = "epanechnikov"

    @property
    def widened(self) -> np.ndarray:
        """Years at which the bandwidth had to be widened locally."""
        return self.years[self.effective_bandwidth > self.bandwidth]


def local_linear_fit(
    series: SeriesView, h: float | None = None, min_bandwidth: float = 1.0
) -> SmootherResult:
    """Fit the local linear trend of one unit's series.

    Parameters
    ----------
    series : SeriesView
        The unit's series; missing points are ignored in the fit but a
        fitted value is still produced for their year.
    h : float, optional
        Bandwidth in years.  Defaults to :func:`rot_bandwidth`.
    min_bandwidth : float
        Floor applied to the rule-of-thumb bandwidth.
    """
    t, y = series.observed()
    if t.size < MIN_OBS:
        raise TooFewObservations(
            f"unit {series.unit}: need {MIN_OBS} observations, got {t.size}"
        )
    if h is None:
        h = rot_bandwidth(t, min_bandwidth=min_bandwidth)
    L_obs, _ = equivalent_kernel(t, t, h)
    resid = y - L_obs @ y
    sigma = float(np.sqrt(resid @ resid / (t.size - 2)))

    L, h_eff = equivalent_kernel(t, series.years, h)
    fitted = L @ y
    se = sigma * np.sqrt((L * L).sum(axis=1))
    return SmootherResult(
        unit=series.unit,
        years=np.asarray(series.years),
        fitted=fitted,
        se=se,
        bandwidth=float(h),
        effective_bandwidth=h_eff,
        sigma=sigma,
    )


def smooth_panel(
    panel: PanelDataset,
    name: str,
    bandwidth: float | None = None,
    min_bandwidth: float = 1.0,
    workers: int | None = None,
) -> dict:
    """Smooth ``name`` for every unit; returns ``{unit: SmootherResult}`` in unit order."""
    views = panel.views(name)
    fit = lambda v: local_linear_fit(v, bandwidth, min_bandwidth)  # noqa: E731
    workers = workers or worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(fit, views))
    else:
        results = [fit(v) for v in views]
    return {r.unit: r for r in results}


def stack_results(panel: PanelDataset, results: dict):
    """Row-aligned ``(fitted, se)`` arrays for a panel."""
    fitted = np.full(panel.n_rows, np.nan)
    se = np.full(panel.n_rows, np.nan)
    for unit in panel.units:
        rows = panel.unit_rows(unit)
        r = results[unit]
        if not np.array_equal(r.years, panel.year[rows]):
            raise AlignmentError(f"smoother years for unit {unit} do not match the panel")
        fitted[rows] = r.fitted
        se[rows] = r.se
    return fitted, se


def preciseness(
    series: SeriesView, result: SmootherResult, spending: SeriesView, revenue: SeriesView
):
    """Mean deviation from the trend relative to mean spending and revenue, in percent."""
    dev = np.nanmean(series.values - result.fitted)
    out = []
    for denom, label in ((spending, "spending"), (revenue, "revenue")):
        m = np.nanmean(denom.values)
        if not np.isfinite(m) or m == 0:
            raise DegenerateDenominator(f"unit {series.unit}: mean {label} is zero")
        out.append(float(dev / m * 100.0))
    return tuple(out)
