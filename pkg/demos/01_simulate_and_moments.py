"""Simulate the two reference MSMD specifications and check their moments.

A binomial and a log-normal MSMD(6) are simulated, and the sample
autocorrelations of durations and log durations are set against the closed
forms. The low-frequency multipliers switch rarely, which is visible as slow
decay in both.

Run: ``python3 demos/01_simulate_and_moments.py``
"""

from __future__ import annotations

import numpy as np

from msmd import acf_levels, acf_logs, simulate, switching_probabilities
from msmd.jumps import sample_acf
from msmd.registry import load_model

N = 200_000
LAGS = np.array([1, 5, 20, 100, 500])

for preset in ("msmd6-binomial", "msmd6-lognormal"):
    p = load_model(preset)
    x, states = simulate(p, N, seed=1)
    print(f"\n{preset}: k={p.k}, b={p.b}, gamma_k={p.gamma_k}, multiplier={p.multiplier}")
    print("switching probabilities:", np.round(switching_probabilities(p), 5))
    switches = (np.diff(states, axis=0) != 0).sum(axis=0)
    print("observed multiplier changes per 1000 obs:", np.round(1000 * switches / N, 2))

    v = x.values
    emp_lvl = sample_acf(v, LAGS.max())[LAGS - 1]
    emp_log = sample_acf(np.log(v), LAGS.max())[LAGS - 1]
    th_lvl = acf_levels(p, LAGS) / acf_levels(p, 0)
    th_log = acf_logs(p, LAGS) / acf_logs(p, 0)
    print(f"{'lag':>5} {'acf x':>9} {'model':>9} {'acf log x':>10} {'model':>9}")
    for row in zip(LAGS, emp_lvl, th_lvl, emp_log, th_log):
        print(f"{row[0]:5d} {row[1]:9.4f} {row[2]:9.4f} {row[3]:10.4f} {row[4]:9.4f}")
    print(f"mean {v.mean():.4f} (model {p.psi_bar}), dispersion {v.std() / v.mean():.3f}")
