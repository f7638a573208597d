"""How duration persistence carries over to daily realized variance.

Prices jump by i.i.d. normal amounts at event times drawn from four duration
models, all calibrated to the same lag-one duration autocorrelation (0.45).
Only the models with slowly decaying duration memory produce persistent
daily realized variance.

Run: ``python3 demos/04_realized_variance_memory.py``
"""

from __future__ import annotations

from msmd.jumps import RV_PRESETS, count_variance_growth, rv_acf_experiment
from msmd.registry import load_model

acf = rv_acf_experiment(RV_PRESETS, n_days=2000, max_lag=50, seed=4)
lags = (1, 5, 10, 25, 50)
print("daily RV autocorrelation")
print(f"{'model':>8} " + " ".join(f"{'lag ' + str(h):>8}" for h in lags))
for name, a in acf.items():
    print(f"{name:>8} " + " ".join(f"{a[h - 1]:8.3f}" for h in lags))

var, slope = count_variance_growth(load_model("counts-fast-mixing"), n_rep=500, seed=4)
print(f"\nlog-log slope of Var N(t) against t for a fast-mixing MSMD: {slope:.3f} (linear growth is 1)")
