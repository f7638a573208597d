"""Pure-jump price process driven by a duration model.

Events arrive at cumulative duration sums; each event moves the price by an
independent normal jump. Daily realized variance sums squared price changes
over a grid of ``dt`` seconds that starts at the first event of each day.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .laws import Binomial
from .model import DurationSeries, MsmdParams, make_rng, simulate
from .rivals import AcdParams, LmsdParams, arfima_acvf, simulate_acd, simulate_lmsd

__all__ = [
    "JumpConfig",
    "RvSeries",
    "RV_PRESETS",
    "model_mean",
    "simulate_durations",
    "simulate_counts",
    "realized_variance",
    "simulate_price_rv",
    "sample_acf",
    "rv_acf_experiment",
    "acf_table_csv",
    "count_variance_growth",
]

RV_PRESETS = {
    "ACD": AcdParams(0.07, (0.24,), (0.69,)),
    "MSMD(4)": MsmdParams(k=4, b=3.30, gamma_k=0.047, multiplier=Binomial(1.84)),
    "MSMD(8)": MsmdParams(k=8, b=3.00, gamma_k=0.076, multiplier=Binomial(1.55)),
    "LMSD": LmsdParams(1.028, 0.73, 0.47, 0.029),
}


@dataclass(frozen=True)
class JumpConfig:
    duration_model: object
    n_days: int = 2000
    day_length: float = 23_400.0
    mean_duration: float = 120.0
    jump_var: float = 1.0 / 195.0
    dt: float = 60.0

    def __post_init__(self):
        if self.jump_var < 0:
            raise ValueError("jump_var must be nonnegative")
        if self.n_days < 1 or self.day_length <= 0 or self.mean_duration <= 0 or self.dt <= 0:
            raise ValueError("n_days, day_length, mean_duration and dt must be positive")

    @property
    def jumps_per_day(self) -> float:
        return self.day_length / self.mean_duration


@dataclass
class RvSeries:
    daily_rv: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict)


def model_mean(model) -> float:
    """Unconditional mean duration of a parameter set."""
    if isinstance(model, MsmdParams):
        return model.psi_bar
    if isinstance(model, AcdParams):
        return model.mean
    if isinstance(model, LmsdParams):
        vz = arfima_acvf(model.d, model.sigma_u2, 1, model.beta)[0] if model.sigma_u2 > 0 else 0.0
        return math.exp(model.psi_mean + 0.5 * vz)
    raise TypeError(f"unsupported duration model {type(model).__name__}")


def simulate_durations(model, n: int, seed: int = 0, replication: int = 0, mean: float | None = None) -> np.ndarray:
    """Durations from any supported model, rescaled to unconditional mean ``mean``."""
    if isinstance(model, MsmdParams):
        x = simulate(model, n, seed, replication)[0].values
    elif isinstance(model, AcdParams):
        x = simulate_acd(model, n, seed, replication).values
    elif isinstance(model, LmsdParams):
        x = simulate_lmsd(model, n, seed, replication).values
    else:
        raise TypeError(f"unsupported duration model {type(model).__name__}")
    if mean is not None:
        x = x * (mean / model_mean(model))
    return x


def simulate_counts(durations, t):
    """``N(t) = max{i : t_i <= t}`` with event times ``t_i`` the cumulative durations."""
    x = durations.values if isinstance(durations, DurationSeries) else np.asarray(durations, dtype=float)
    if np.any(x <= 0):
        raise ValueError("durations must be positive")
    times = np.cumsum(x)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr > times[-1]):
        raise ValueError("horizon beyond the last simulated event")
    out = np.searchsorted(times, t_arr, side="right")
    return int(out) if np.ndim(t) == 0 else out


def realized_variance(times, jumps, n_days: int, day_length: float, dt: float) -> RvSeries:
    """Daily realized variance of the pure-jump price path.

    For each day the grid is ``a, a + dt, ...`` with ``a`` the day's first
    event, plus a final partial interval to the end of the day. An interval
    ``(s, s + dt]`` collects the jumps it contains, so the jump at ``a``
    itself is the day's opening level and does not enter that day's RV.
    """
    times = np.asarray(times, dtype=float)
    jumps = np.asarray(jumps, dtype=float)
    day = np.floor(times / day_length).astype(np.int64)
    keep = day < n_days
    times, jumps, day = times[keep], jumps[keep], day[keep]
    counts = np.bincount(day, minlength=n_days)
    rv = np.zeros(n_days)
    starts = np.concatenate([[0], np.cumsum(counts)])
    for dd in range(n_days):
        a, b = starts[dd], starts[dd + 1]
        if b - a < 2:
            continue
        t0 = times[a]
        tt = times[a + 1 : b]
        bins = np.ceil((tt - t0) / dt).astype(np.int64) - 1
        inc = np.bincount(bins, weights=jumps[a + 1 : b])
        rv[dd] = float(inc @ inc)
    return RvSeries(rv, counts)


def simulate_price_rv(config: JumpConfig, seed: int = 0, replication: int = 0) -> RvSeries:
    """Simulate ``config.n_days`` days of the pure-jump price and their daily RV."""
    target = config.n_days * config.day_length
    n = int(1.2 * target / config.mean_duration) + 1000
    rng = make_rng(seed, 10_000 + replication)
    for attempt in range(20):
        x = simulate_durations(config.duration_model, n, seed, replication, config.mean_duration)
        times = np.cumsum(x)
        if times[-1] > target:
            break
        n *= 2
    else:
        raise RuntimeError("could not simulate enough durations to cover the requested days")
    jumps = rng.normal(0.0, math.sqrt(config.jump_var), times.size) if config.jump_var > 0 else np.zeros(times.size)
    out = realized_variance(times, jumps, config.n_days, config.day_length, config.dt)
    out.meta = {"model": type(config.duration_model).__name__, "seed": seed, "replication": replication}
    return out


def sample_acf(x, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags ``1..max_lag``."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    den = float(x @ x)
    return np.array([float(x[h:] @ x[:-h]) / den for h in range(1, max_lag + 1)])


def rv_acf_experiment(models: dict | None = None, n_days: int = 2000, max_lag: int = 50, seed: int = 0, **config) -> dict:
    """Sample ACF of daily RV for each named duration model."""
    models = RV_PRESETS if models is None else models
    out = {}
    for i, (name, mdl) in enumerate(models.items()):
        rv = simulate_price_rv(JumpConfig(mdl, n_days=n_days, **config), seed=seed, replication=i)
        out[name] = sample_acf(rv.daily_rv, max_lag)
    return out


def acf_table_csv(table: dict) -> str:
    """Long-format CSV ``lag,model,acf``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lag", "model", "acf"])
    for name, acf in table.items():
        for h, v in enumerate(acf, start=1):
            w.writerow([h, name, f"{v:.6f}"])
    return buf.getvalue()


def count_variance_growth(model, t_grid=(1000.0, 2000.0, 4000.0, 8000.0), n_rep: int = 2000, seed: int = 0,
                          mean_duration: float = 120.0) -> tuple[np.ndarray, float]:
    """Monte Carlo ``Var(N(t))`` over independent paths and the log-log slope against ``t``."""
    t_grid = np.asarray(t_grid, dtype=float)
    n = int(2.0 * t_grid.max() / mean_duration) + 200
    counts = np.empty((n_rep, t_grid.size))
    for r in range(n_rep):
        x = simulate_durations(model, n, seed, r, mean_duration)
        while x.sum() <= t_grid.max():
            n *= 2
            x = simulate_durations(model, n, seed, r, mean_duration)
        counts[r] = simulate_counts(x, t_grid)
    var = counts.var(axis=0, ddof=1)
    slope = float(np.polyfit(np.log(t_grid), np.log(var), 1)[0])
    return var, slope
