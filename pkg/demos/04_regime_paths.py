"""Distributed-lag impact paths under each planted fiscal regime.

Spending responds to detected shocks only under the non-smoothing regimes,
so the positive and negative paths separate from the regular-flow path.
"""

from shockpanel import DlmSpec, SynthConfig, classify_panel, estimate, generate, smooth_panel

for regime, rate in (("smoothing", 0.0), ("hand_to_mouth", 0.5),
                     ("politico_economic", 0.4), ("fiscal_conservatism", 0.4)):
    cfg = SynthConfig(seed=3, regime=regime, rate=rate)
    panel, _ = generate(cfg)
    sm = smooth_panel(panel, "ipgt")
    fc = classify_panel(panel, "ipgt", sm, 3)
    out = estimate(DlmSpec(candidates=tuple(cfg.covariate_names)), panel, sm, fc)
    print(f"\n{regime} (rate {rate})")
    print("  tau " + "".join(f"{t:>7d}" for t in out.spec.taus))
    for g in ("regular", "positive", "negative"):
        print(f"  {g:8s}" + "".join(f"{v:7.3f}" for v in out.impacts(g).values()))
    p = out.pair(0, "positive_vs_negative")["p"]
    print(f"  positive vs negative at tau=0: p = {p:.3g}")
