"""Synthetic municipal panels with planted fiscal-response regimes.

Each unit has a smooth receipt trend, regular noise and shocks in the
property-gains-tax series (``ipgt``).  Shocks come mostly as displacement
pairs (a receipt pulled forward or pushed back one year, so a positive year
is followed by an equal negative one or vice versa) plus occasional
isolated shocks.  Expenditures respond only to receipts realized in
detected shock years, i.e. years that the library's own smoother and
classifier flag at threshold ``response_k``:

* ``smoothing``            no response
* ``hand_to_mouth``        ``rate * ipgt`` in positive and negative shock years
* ``politico_economic``    ``rate * ipgt`` in positive shock years only
* ``fiscal_conservatism``  ``rate * ipgt`` in negative shock years only

spread over ``tau = 0, 1, ...`` by ``response_path``.  Tax receipts contain
``pass_through * ipgt`` plus an independent other-tax base.  AR(1)
confounders, scaled to each unit's receipt level, load on receipts and both
outcomes; they are emitted as candidate covariates ``cov_1..`` together
with pure-noise covariates.

Amounts are in thousand CHF at magnitudes typical of mid-sized
municipalities.  Each unit is drawn from its own child seed, so output does
not depend on generation order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .panel import PanelDataset, SeriesView, format_float
from .shocks import classify
from .smoother import local_linear_fit

__all__ = ["SynthConfig", "GroundTruth", "generate", "calibration_report", "REGIME_NAMES",
           "BAD_CONTROLS"]

REGIME_NAMES = ("smoothing", "hand_to_mouth", "politico_economic", "fiscal_conservatism")

# Series driven by the same private decisions as the receipts; never candidates.
BAD_CONTROLS = frozenset({"transactions", "property_prices", "migration"})


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.  All monetary amounts in thousand CHF.

    Trend and noise parameters are relative to each unit's receipt level
    unless noted.
    """

    n_units: int = 163
    n_years: int = 27
    first_year: int = 1990
    seed: int = 0

    # receipt trend: level ~ lognormal(log(level_median), level_sigma)
    level_median: float = 1515.0
    level_sigma: float = 0.2
    slope_sd: float = 0.2
    curvature_sd: float = 0.2
    noise_sd: float = 0.01
    noise_rho: float = 0.0

    # shock process: displacement pairs plus isolated shocks
    pair_prob: float = 0.3
    shock_prob: float = 0.02
    positive_share: float = 0.5
    isolated_positive_share: float = 0.8
    pos_scale: float = 0.7
    pos_sigma: float = 0.1
    neg_scale: float = 0.55
    neg_sigma: float = 0.1
    neg_cap: float = 0.9
    pair_scale: float = 0.6
    pair_sigma: float = 0.03
    ipgt_floor: float = -700.0

    # outcomes
    spend_ratio: float = 0.058
    spend_ratio_sigma: float = 0.35
    ratio_level_corr: float = 0.85
    revenue_to_spending: float = 1.176
    tax_share: float = 0.62
    growth_sd: float = 0.002
    expenditure_noise: float = 0.0002
    tax_noise: float = 0.004
    year_effect_sd: float = 200.0

    # regime
    regime: str = "smoothing"
    rate: float = 0.0
    response_path: tuple = (1.0,)
    response_k: float = 3.0
    pass_through: float = 1.0

    # confounders and covariates
    n_confounders: int = 2
    confounder_rho: float = 0.3
    confounder_scale: float = 0.01
    load_ipgt: float = 1.0
    load_tax: float = 0.5
    load_expenditure: float = 5.0
    n_noise_covariates: int = 4

    def __post_init__(self):
        object.__setattr__(self, "response_path", tuple(float(w) for w in self.response_path))
        if self.regime not in REGIME_NAMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIME_NAMES}")
        for name in ("pair_prob", "shock_prob", "positive_share", "isolated_positive_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        if self.n_units < 1 or self.n_years < 5:
            raise ValueError("need at least one unit and five years")

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.first_year, self.first_year + self.n_years)

    @property
    def covariate_names(self) -> list:
        return [f"cov_{j + 1}" for j in range(self.n_confounders + self.n_noise_covariates)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["response_path"] = list(self.response_path)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    """Per-row latent components of a generated panel (never fed to estimators)."""

    config: SynthConfig
    unit: np.ndarray
    year: np.ndarray
    trend: np.ndarray
    latent_shock: np.ndarray
    latent_magnitude: np.ndarray
    detected: np.ndarray
    response: np.ndarray
    columns: dict = field(default_factory=dict)

    def impact_path(self, taus) -> dict:
        """Planted total impact per regime and ``tau`` on current expenditures."""
        cfg = self.config
        per_tau = {t: (cfg.rate * cfg.response_path[t] if 0 <= t < len(cfg.response_path) else 0.0)
                   for t in taus}
        zero = {t: 0.0 for t in taus}
        pos = per_tau if cfg.regime in ("hand_to_mouth", "politico_economic") else zero
        neg = per_tau if cfg.regime in ("hand_to_mouth", "fiscal_conservatism") else zero
        return {"regular": dict(zero), "positive": dict(pos), "negative": dict(neg)}

    def write_csv(self, path) -> None:
        names = ["trend", "latent_shock", "latent_magnitude", "detected", "response"]
        data = [self.trend, self.latent_shock, self.latent_magnitude, self.detected, self.response]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(["unit", "year", *names]) + "\n")
            for r in range(self.unit.size):
                cells = [format_float(c[r]) for c in data]
                fh.write(",".join([str(self.unit[r]), str(int(self.year[r])), *cells]) + "\n")


def _ar1(rng, n, rho, size=None):
    shape = (n,) if size is None else (size, n)
    e = rng.standard_normal(shape) * np.sqrt(1.0 - rho * rho)
    out = np.empty(shape)
    out[..., 0] = rng.standard_normal(shape[:-1]) if size else rng.standard_normal()
    for t in range(1, n):
        out[..., t] = rho * out[..., t - 1] + e[..., t]
    return out


def _lognormal_unit_mean(rng, sigma, size=None):
    return np.exp(sigma * rng.standard_normal(size) - 0.5 * sigma * sigma)


def _shock_signs(rng, T, cfg) -> np.ndarray:
    """Latent shock signs: displacement pairs plus isolated shocks.

    A displacement moves receipts between two adjacent years, so a shock of
    one sign is followed by one of the opposite sign.  Pairs start with
    probability ``pair_prob`` in any year whose neighbour is still free
    and lead with a positive shock with probability ``positive_share``;
    the remaining years carry isolated shocks with probability
    ``shock_prob``.
    """
    signs = np.zeros(T, dtype=np.int8)
    paired = np.full(T, -1)
    start = rng.random(T)
    lead = np.where(rng.random(T) < cfg.positive_share, 1, -1)
    t = 0
    while t < T - 1:
        if start[t] < cfg.pair_prob:
            signs[t], signs[t + 1] = lead[t], -lead[t]
            paired[t] = paired[t + 1] = t
            t += 2
        else:
            t += 1
    iso = (signs == 0) & (rng.random(T) < cfg.shock_prob)
    iso_sign = np.where(rng.random(T) < cfg.isolated_positive_share, 1, -1)
    signs[iso] = iso_sign[iso]
    return signs, paired


def _unit_draw(cfg: SynthConfig, unit: str, seq: np.random.SeedSequence, year_fx):
    rng = np.random.default_rng(seq)
    T = cfg.n_years
    years = cfg.years
    s = (np.arange(T) - (T - 1) / 2.0) / T

    z_level = rng.standard_normal()
    level = cfg.level_median * np.exp(cfg.level_sigma * z_level)
    slope = cfg.slope_sd * rng.standard_normal()
    curv = cfg.curvature_sd * rng.standard_normal()
    trend = level * np.maximum(0.1, 1.0 + slope * s + curv * (s * s - 1.0 / 12.0))

    n_cov = cfg.n_confounders + cfg.n_noise_covariates
    # covariates in thousand CHF, scaled to the unit's receipt level
    cov = cfg.confounder_scale * level * (
        _ar1(rng, T, cfg.confounder_rho, size=n_cov) if n_cov else np.empty((0, T)))
    conf_amount = cov[: cfg.n_confounders].sum(axis=0) if cfg.n_confounders else np.zeros(T)

    noise = cfg.noise_sd * trend * _ar1(rng, T, cfg.noise_rho)
    latent, paired = _shock_signs(rng, T, cfg)
    pos_mag = cfg.pos_scale * trend * _lognormal_unit_mean(rng, cfg.pos_sigma, T)
    neg_mag = cfg.neg_scale * trend * _lognormal_unit_mean(rng, cfg.neg_sigma, T)
    # a displacement moves one amount between the two years of the pair
    pair_mag = cfg.pair_scale * trend * _lognormal_unit_mean(rng, cfg.pair_sigma, T)
    pair_mag[1:] = np.where(paired[1:] == paired[:-1], pair_mag[:-1], pair_mag[1:])
    magnitude = np.where(paired >= 0, pair_mag, np.where(latent > 0, pos_mag, neg_mag))
    magnitude = np.where(latent < 0, np.minimum(magnitude, cfg.neg_cap * trend), magnitude)
    magnitude = np.where(latent == 0, 0.0, magnitude)
    ipgt = trend + noise + latent * magnitude + cfg.load_ipgt * conf_amount
    ipgt = np.maximum(ipgt, cfg.ipgt_floor)

    view = SeriesView(unit, years, ipgt)
    fc = classify(view, local_linear_fit(view), cfg.response_k)
    detected = fc.codes.astype(np.int8)

    if cfg.regime == "hand_to_mouth":
        resp_mask = detected != 0
    elif cfg.regime == "politico_economic":
        resp_mask = detected > 0
    elif cfg.regime == "fiscal_conservatism":
        resp_mask = detected < 0
    else:
        resp_mask = np.zeros(T, dtype=bool)
    flow = np.where(resp_mask, ipgt, 0.0)
    response = np.zeros(T)
    for tau, w in enumerate(cfg.response_path):
        if tau < T:
            response[tau:] += cfg.rate * w * flow[: T - tau]

    rc = cfg.ratio_level_corr
    z_ratio = rc * z_level + np.sqrt(1.0 - rc * rc) * rng.standard_normal()
    sr = cfg.spend_ratio_sigma
    ratio = cfg.spend_ratio * np.exp(sr * z_ratio - 0.5 * sr * sr)
    spend_base = level / ratio
    g_exp, g_tax, g_oth = cfg.growth_sd * rng.standard_normal(3)
    expenditures = (spend_base * (1.0 + g_exp * s)
                    + cfg.expenditure_noise * spend_base * rng.standard_normal(T)
                    + cfg.load_expenditure * conf_amount + response + year_fx[0])
    other_tax = (cfg.tax_share * spend_base * (1.0 + g_tax * s)
                 + cfg.tax_noise * spend_base * rng.standard_normal(T)
                 + cfg.load_tax * conf_amount + year_fx[1])
    tax = cfg.pass_through * ipgt + other_tax
    nontax = ((cfg.revenue_to_spending - cfg.tax_share) * spend_base * (1.0 + g_oth * s)
              + cfg.tax_noise * spend_base * rng.standard_normal(T))
    revenue = tax + nontax
    # bad control: moves with receipts, must never be a candidate
    transactions = np.maximum(0.0, 20.0 + 10.0 * (ipgt - trend) / level + rng.standard_normal(T))

    series = {
        "ipgt": ipgt,
        "tax_receipts": tax,
        "current_expenditures": expenditures,
        "current_revenue": revenue,
        "transactions": transactions,
    }
    for j in range(n_cov):
        series[f"cov_{j + 1}"] = cov[j]
    truth = dict(trend=trend, latent_shock=latent, latent_magnitude=magnitude,
                 detected=detected, response=response, other_tax=other_tax)
    return series, truth


def generate(config: SynthConfig | None = None):
    """Draw a panel and its ground truth; deterministic for a given config."""
    cfg = config or SynthConfig()
    root = np.random.SeedSequence(cfg.seed)
    common, units_seq = root.spawn(2)
    crng = np.random.default_rng(common)
    year_fx = cfg.year_effect_sd * crng.standard_normal((2, cfg.n_years))
    width = max(3, len(str(cfg.n_units)))
    ids = [f"u{i + 1:0{width}d}" for i in range(cfg.n_units)]
    draws = [_unit_draw(cfg, u, sq, year_fx) for u, sq in zip(ids, units_seq.spawn(cfg.n_units))]

    T = cfg.n_years
    unit_col = np.repeat(np.asarray(ids, dtype=object), T)
    year_col = np.tile(cfg.years, cfg.n_units)
    series = {k: np.concatenate([d[0][k] for d in draws]) for k in draws[0][0]}
    tr = {k: np.concatenate([d[1][k] for d in draws]) for k in draws[0][1]}
    panel = PanelDataset.from_columns(unit_col, year_col, series)
    truth = GroundTruth(
        config=cfg,
        unit=unit_col,
        year=year_col,
        trend=tr["trend"],
        latent_shock=tr["latent_shock"],
        latent_magnitude=tr["latent_magnitude"],
        detected=tr["detected"],
        response=tr["response"],
        columns={"other_tax": tr["other_tax"]},
    )
    return panel, truth


def calibration_report(panel: PanelDataset, k: float = 3.0, base: str = "ipgt",
                       spending: str = "current_expenditures",
                       revenue: str = "current_revenue") -> dict:
    """Descriptive summary: receipt level and shares plus k-sigma class shares."""
    from .shocks import classify_panel
    from .smoother import smooth_panel

    x = panel[base]
    pct_s = x / panel[spending] * 100.0
    pct_r = x / panel[revenue] * 100.0

    def moments(v):
        v = v[~np.isnan(v)]
        return dict(n=int(v.size), mean=float(v.mean()), sd=float(v.std(ddof=1)),
                    min=float(v.min()), max=float(v.max()))

    classes = classify_panel(panel, base, smooth_panel(panel, base), k)
    shares = {label: float(v) * 100.0 for label, v in classes.shares().items()}
    return {
        "ipgt": moments(x),
        "ipgt_pct_spending": moments(pct_s),
        "ipgt_pct_revenue": moments(pct_r),
        "shares_pct": shares,
        "k": float(k),
    }
