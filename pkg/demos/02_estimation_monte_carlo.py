"""Compare exact maximum likelihood with Whittle estimation on small samples.

Both estimators are applied to the same simulated binomial MSMD(8) paths. MLE
filters over all 256 hidden states; Whittle works on the periodogram of log
durations and costs a few FFTs. The full-size studies are run from the
command line, e.g. ``msmd mc --model mc-binomial-exponential --n 10000 --R 100``.

Run: ``python3 demos/02_estimation_monte_carlo.py`` (a couple of minutes, mostly MLE)
"""

from __future__ import annotations

import time

from msmd.montecarlo import run_mc
from msmd.registry import load_model

truth = load_model("mc-binomial-exponential")
N, R = 2500, 4

for estimator in ("whittle", "mle"):
    t = time.perf_counter()
    res = run_mc(estimator, truth, N, R, seed=2, n_starts=3)
    print(f"\n{estimator} (R={R}, {time.perf_counter() - t:.1f}s, converged {int(res.converged.sum())}/{R})")
    for row in res.table():
        print("  ".join(f"{c:>18}" for c in row))
