import numpy as np
import pytest

from shockpanel.panel import write_csv
from shockpanel.synth import BAD_CONTROLS, REGIME_NAMES, SynthConfig, calibration_report, generate

QUIET = dict(n_units=12, year_effect_sd=0.0, growth_sd=0.0, expenditure_noise=0.0,
             n_confounders=0, load_ipgt=0.0)


def test_smoothing_expenditures_flat_within_unit():
    panel, truth = generate(SynthConfig(seed=1, **QUIET))
    assert truth.latent_shock.any()
    for u in panel.units:
        e = panel["current_expenditures"][panel.unit_rows(u)]
        assert np.ptp(e) == 0.0


def test_pass_through_is_exact():
    panel, truth = generate(SynthConfig(seed=2, n_units=20))
    np.testing.assert_allclose(panel["tax_receipts"] - truth.columns["other_tax"], panel["ipgt"],
                               rtol=1e-13)
    assert np.all(panel["tax_receipts"] == truth.columns["other_tax"] + panel["ipgt"])


def test_response_only_in_detected_years():
    cfg = SynthConfig(seed=3, n_units=20, regime="hand_to_mouth", rate=0.5, **{
        k: v for k, v in QUIET.items() if k != "n_units"})
    panel, truth = generate(cfg)
    expect = 0.5 * panel["ipgt"] * (truth.detected != 0)
    np.testing.assert_allclose(truth.response, expect, rtol=1e-15)
    flat, _ = generate(SynthConfig(**{**cfg.to_dict(), "regime": "smoothing", "rate": 0.0}))
    np.testing.assert_allclose(panel["current_expenditures"] - flat["current_expenditures"],
                               truth.response, atol=1e-9)


@pytest.mark.parametrize("regime,sign", [("politico_economic", 1), ("fiscal_conservatism", -1)])
def test_one_sided_regimes(regime, sign):
    panel, truth = generate(SynthConfig(seed=4, n_units=20, regime=regime, rate=0.4))
    hit = truth.response != 0
    assert hit.any()
    assert np.all(truth.detected[hit] == sign)


def test_response_path_spreads_over_lags():
    cfg = SynthConfig(seed=5, n_units=10, regime="hand_to_mouth", rate=0.5, response_path=(0.6, 0.4))
    panel, truth = generate(cfg)
    flow = panel["ipgt"] * (truth.detected != 0)
    lagged = panel.lagged(flow, 1)
    expect = 0.5 * (0.6 * flow + 0.4 * np.nan_to_num(lagged))
    np.testing.assert_allclose(truth.response, expect, atol=1e-9)
    path = truth.impact_path(range(-2, 6))
    assert path["positive"][0] == pytest.approx(0.3)
    assert path["negative"][1] == pytest.approx(0.2)
    assert path["regular"][0] == 0.0 and path["positive"][2] == 0.0


def test_impact_path_by_regime():
    taus = range(-2, 6)
    for regime in REGIME_NAMES:
        _, truth = generate(SynthConfig(seed=0, n_units=2, regime=regime, rate=0.4))
        p = truth.impact_path(taus)
        pos = regime in ("hand_to_mouth", "politico_economic")
        neg = regime in ("hand_to_mouth", "fiscal_conservatism")
        assert p["positive"][0] == (0.4 if pos else 0.0)
        assert p["negative"][0] == (0.4 if neg else 0.0)


def test_seed_determinism_bytes(tmp_path):
    a, _ = generate(SynthConfig(seed=9, n_units=15))
    b, _ = generate(SynthConfig(seed=9, n_units=15))
    c, _ = generate(SynthConfig(seed=10, n_units=15))
    for name, p in (("a", a), ("b", b), ("c", c)):
        write_csv(p, tmp_path / f"{name}.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_units_independent_of_panel_size():
    small, _ = generate(SynthConfig(seed=6, n_units=5))
    large, _ = generate(SynthConfig(seed=6, n_units=8))
    for u in small.units:
        np.testing.assert_array_equal(small["ipgt"][small.unit_rows(u)], large["ipgt"][large.unit_rows(u)])


def test_no_truth_leakage():
    panel, truth = generate(SynthConfig(seed=0, n_units=3))
    leaked = {"trend", "latent_shock", "latent_magnitude", "detected", "response", "other_tax"}
    assert not leaked & set(panel.series_names)
    assert {"ipgt", "tax_receipts", "current_expenditures", "current_revenue"} <= set(panel.series_names)
    assert not BAD_CONTROLS & set(SynthConfig().covariate_names)


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        SynthConfig(pair_prob=1.5)
    with pytest.raises(ValueError):
        SynthConfig(rate=-0.1)
    with pytest.raises(ValueError):
        SynthConfig(regime="keynesian")
    with pytest.raises(ValueError):
        SynthConfig.from_dict({"n_units": 3, "colour": "red"})
    cfg = SynthConfig(seed=4, response_path=[0.5, 0.5])
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg


def test_negative_values_allowed_above_floor():
    panel, _ = generate(SynthConfig(seed=0))
    assert panel["ipgt"].min() >= SynthConfig().ipgt_floor


def test_degenerate_config_all_regular():
    cfg = SynthConfig(seed=0, n_units=10, noise_sd=0.0, pair_prob=0.0, shock_prob=0.0,
                      curvature_sd=0.0, n_confounders=0, load_ipgt=0.0)
    rep = calibration_report(generate(cfg)[0])
    assert rep["shares_pct"] == {"Regular": 100.0, "PositiveShock": 0.0, "NegativeShock": 0.0}


def test_calibration_anchors(default_panel):
    panel = default_panel[0]
    rep = calibration_report(panel)
    assert abs(rep["ipgt"]["mean"] / 1547.54 - 1) <= 0.20
    assert abs(rep["ipgt_pct_spending"]["mean"] - 5.80) <= 1.5
    assert abs(rep["ipgt_pct_revenue"]["mean"] - 4.93) <= 1.5
    shares = rep["shares_pct"]
    assert abs(shares["Regular"] - 65.5) <= 3
    assert abs(shares["PositiveShock"] - 17.8) <= 3
    assert abs(shares["NegativeShock"] - 16.7) <= 3
