"""Out-of-sample cumulative duration forecasts: MSMD against ACD and LMSD.

Data come from a binomial MSMD(8). Every model is fitted on the first 10,000
durations and then forecasts the sum of the next h durations from each later
origin. Entries marked ``*``/``**`` beat the ACD benchmark at 5%/1% by the
Diebold-Mariano test; ``+``/``++`` mark significant losses.

Run: ``python3 demos/03_forecast_tournament.py`` (about a minute)
"""

from __future__ import annotations

from msmd import simulate
from msmd.registry import load_model
from msmd.tournament import TournamentConfig, run_tournament

x, _ = simulate(load_model("mc-binomial-exponential"), 12_000, seed=3)
cfg = TournamentConfig(models=("msmd-mle:8", "acd", "lmsd"), combinations=("MSMD(8)+LMSD",), n_starts=3)
res = run_tournament(x, cfg)

for loss in ("mse", "mad"):
    print(f"\n{loss.upper()} of cumulative forecasts")
    for row in res.report.table(loss):
        print("  ".join(f"{c:>14}" for c in row))
