"""Out-of-sample forecasting comparison of fitted duration models.

The first ``n_train`` observations fix every model's parameters; each later
origin produces cumulative forecasts of the next ``h`` durations, which are
scored against the realized sums.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .forecast import (
    HORIZONS,
    AcvProvider,
    ForecastReport,
    build_report,
    combine_equal,
    cumulative_paths,
    linear_forecast_paths,
    realized_cumulative,
)
from .mle import filter_loglik, fit_mle, forecast_paths
from .rivals import LmsdKalman, acd_forecast_paths, fit_acd, fit_lmsd_whittle
from .whittle import MsmdSpectrum, fit_whittle

__all__ = ["TournamentConfig", "TournamentResult", "run_tournament", "parse_model"]

log = logging.getLogger(__name__)


def parse_model(label: str) -> tuple[str, int | None]:
    """``"msmd-mle:8"`` to ``("msmd-mle", 8)``; rivals carry no order."""
    kind, _, k = label.partition(":")
    if kind not in ("msmd-mle", "msmd-whittle", "acd", "lmsd"):
        raise ValueError(f"unknown tournament model {label!r}")
    if kind.startswith("msmd"):
        return kind, int(k or 8)
    return kind, None


def _name(kind: str, k: int | None) -> str:
    return {"msmd-mle": f"MSMD({k})", "msmd-whittle": f"MSMD({k})-W", "acd": "ACD", "lmsd": "LMSD"}[kind]


@dataclass(frozen=True)
class TournamentConfig:
    n_train: int = 10_000
    n_test: int = 2_000
    horizons: tuple = HORIZONS
    models: tuple = ("msmd-mle:8", "acd", "lmsd")
    combinations: tuple = ()
    innovation: str = "exponential"
    benchmark: str = "ACD"
    window: int = 1024
    n_starts: int = 5
    seed: int = 0


@dataclass
class TournamentResult:
    report: ForecastReport
    fits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"report": self.report.to_dict(), "fits": {k: v.to_dict() for k, v in self.fits.items()}}


def run_tournament(series, config: TournamentConfig = TournamentConfig()) -> TournamentResult:
    """Fit each model on the training span and score cumulative forecasts.

    ``combinations`` lists ``"+"``-joined model names (e.g. ``"MSMD(8)+LMSD"``)
    to average with equal weights.
    """
    x = np.asarray(series.values if hasattr(series, "values") else series, dtype=float)
    H = max(config.horizons)
    if x.size < config.n_train + config.n_test:
        raise ValueError(f"series has {x.size} observations; need n_train + n_test = {config.n_train + config.n_test}")
    if config.n_test < H + 30:
        raise ValueError(f"out-of-sample length {config.n_test} is too short for horizon {H} and the DM test")
    x = x[: config.n_train + config.n_test]
    train = x[: config.n_train]
    origins = np.arange(config.n_train - 1, x.size - 1 - H)
    actual = realized_cumulative(x, origins, config.horizons)
    cols = np.asarray(config.horizons) - 1
    fits, cum = {}, {}
    for label in config.models:
        kind, k = parse_model(label)
        name = _name(kind, k)
        log.info("fitting %s", name)
        if kind == "msmd-mle":
            fit = fit_mle(train, k, config.innovation, n_starts=config.n_starts, seed=config.seed)
            probs = filter_loglik(fit.params, x, store=True).filtered_probs
            paths = forecast_paths(fit.params, probs[origins], H)
        elif kind == "msmd-whittle":
            fit = fit_whittle(MsmdSpectrum(k, "binomial", config.innovation), np.log(train),
                              n_starts=config.n_starts, seed=config.seed)
            params = fit.params(psi_bar=float(train.mean()))
            paths = linear_forecast_paths(AcvProvider.from_msmd(params), x, origins, H, config.window)
        elif kind == "acd":
            fit = fit_acd(train, innovation=config.innovation, seed=config.seed)
            paths = acd_forecast_paths(fit.params, x, origins, H)
        else:
            fit = fit_lmsd_whittle(np.log(train), config.innovation, n_starts=config.n_starts, seed=config.seed)
            paths = LmsdKalman(fit.params).forecast_paths(np.log(x), origins, H)
        fits[name] = fit
        cum[name] = cumulative_paths(paths)[:, cols]
    for combo in config.combinations:
        parts = combo.split("+")
        missing = [p for p in parts if p not in cum]
        if missing:
            raise ValueError(f"combination {combo!r} refers to models not in the tournament: {missing}")
        cum[combo] = combine_equal(*(cum[p] for p in parts))
    bench = config.benchmark if config.benchmark in cum else None
    report = build_report(actual, cum, origins, config.horizons, benchmark=bench)
    return TournamentResult(report, fits)
