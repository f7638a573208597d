"""Tick data to diurnally adjusted price durations.

Pipeline: read ``timestamp,price`` ticks, keep in-session business-day ticks,
thin them to price durations (time until the price moves by at least ``c``
from the last reference), estimate a time-of-day profile per weekday by
Nadaraya-Watson regression, and divide it out.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from numba import njit
from scipy import stats

from .model import DurationSeries

__all__ = [
    "THRESHOLDS",
    "SessionConfig",
    "TickSeries",
    "read_ticks",
    "thin_events",
    "thin_to_price_durations",
    "SeasonalProfile",
    "silverman_bandwidth",
    "fit_seasonal",
    "adjust",
    "describe",
    "describe_table",
    "simulate_ticks",
    "diurnal_layout",
]

log = logging.getLogger(__name__)

THRESHOLDS = {"CHF": 0.0003, "EUR": 0.0003, "JPY": 0.03}


def _hms(s: str) -> int:
    parts = [int(p) for p in s.split(":")]
    while len(parts) < 3:
        parts.append(0)
    return parts[0] * 3600 + parts[1] * 60 + parts[2]


@dataclass(frozen=True)
class SessionConfig:
    """Trading session in local time, plus excluded dates."""

    tz: str = "America/Chicago"
    open: str = "07:20"
    close: str = "14:00"
    holidays: tuple = ()

    @property
    def open_s(self) -> int:
        return _hms(self.open)

    @property
    def close_s(self) -> int:
        return _hms(self.close)

    @classmethod
    def from_json(cls, src) -> "SessionConfig":
        text = Path(src).read_text() if not str(src).lstrip().startswith("{") else str(src)
        d = json.loads(text)
        sess = d.get("session", [cls.open, cls.close])
        return cls(d.get("tz", cls.tz), sess[0], sess[1], tuple(d.get("holidays", ())))

    def to_dict(self) -> dict:
        return {"tz": self.tz, "session": [self.open, self.close], "holidays": list(self.holidays)}


@dataclass
class TickSeries:
    """In-session ticks: epoch-second timestamps, prices and local calendar fields."""

    timestamps: np.ndarray
    prices: np.ndarray
    session: SessionConfig = field(default_factory=SessionConfig)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.prices = np.asarray(self.prices, dtype=float)
        if self.timestamps.shape != self.prices.shape:
            raise ValueError("timestamps and prices must have equal length")
        if np.any(np.diff(self.timestamps) < 0):
            raise ValueError("timestamps must be nondecreasing")
        if not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise ValueError("prices must be positive and finite")

    def local(self) -> pd.DatetimeIndex:
        return pd.to_datetime(self.timestamps, unit="s", utc=True).tz_convert(self.session.tz)

    def day_keys(self) -> np.ndarray:
        return np.asarray(self.local().normalize().tz_localize(None).values.astype("datetime64[D]"))

    @classmethod
    def from_frame(cls, df: pd.DataFrame, session: SessionConfig | None = None, filter_session: bool = True) -> "TickSeries":
        session = session or SessionConfig()
        ts = df["timestamp"]
        if pd.api.types.is_numeric_dtype(ts):
            secs = ts.astype(float).to_numpy()
        else:
            parsed = pd.to_datetime(ts, utc=False)
            if parsed.dt.tz is None:
                parsed = parsed.dt.tz_localize(session.tz)
            secs = parsed.dt.tz_convert("UTC").astype("int64").to_numpy() / 1e9
        frame = pd.DataFrame({"t": secs, "p": df["price"].astype(float).to_numpy()})
        frame = frame.sort_values("t", kind="stable").groupby("t", sort=True).last().reset_index()
        ticks = cls(frame["t"].to_numpy(), frame["p"].to_numpy(), session)
        return ticks.in_session() if filter_session else ticks

    def in_session(self) -> "TickSeries":
        loc = self.local()
        tod = loc.hour * 3600 + loc.minute * 60 + loc.second
        dates = {pd.Timestamp(h).date() for h in self.session.holidays}
        keep = (
            (tod >= self.session.open_s)
            & (tod <= self.session.close_s)
            & (loc.dayofweek < 5)
            & ~pd.Index(loc.date).isin(dates)
        )
        keep = np.asarray(keep)
        return TickSeries(self.timestamps[keep], self.prices[keep], self.session)


def read_ticks(path, session: SessionConfig | None = None) -> TickSeries:
    """Read a ``timestamp,price`` CSV (ISO-8601 or epoch seconds)."""
    df = pd.read_csv(path)
    missing = {"timestamp", "price"} - set(df.columns)
    if missing:
        raise ValueError(f"tick file lacks columns {sorted(missing)}")
    return TickSeries.from_frame(df, session)


# --------------------------------------------------------------------------- #
def thin_events(ticks: TickSeries, c: float, rel_tol: float = 1e-9):
    """Event ticks of the thinning rule, per day.

    Returns a list of ``(times, prices)`` arrays, one per nonempty day; the
    first entry of each is the day's opening trade (the first reference).
    A move counts when ``|p - ref| >= c (1 - rel_tol)``, which absorbs the
    binary rounding of decimal price grids.
    """
    if not c > 0:
        raise ValueError("threshold c must be positive")
    keys = ticks.day_keys()
    out = []
    thr = c * (1.0 - rel_tol)
    if ticks.timestamps.size == 0:
        return out
    bounds = np.flatnonzero(np.diff(keys.astype("int64"))) + 1
    for a, b in zip(np.r_[0, bounds], np.r_[bounds, keys.size]):
        if b <= a:
            log.info("skipping empty day")
            continue
        t, p = ticks.timestamps[a:b], ticks.prices[a:b]
        idx = _trigger_indices(p, thr)
        out.append((t[idx], p[idx]))
    return out


@njit(cache=True)
def _trigger_indices(p, thr):
    idx = np.empty(p.size, dtype=np.int64)
    idx[0] = 0
    m = 1
    ref = p[0]
    for i in range(1, p.size):
        if abs(p[i] - ref) >= thr:
            idx[m] = i
            m += 1
            ref = p[i]
    return idx[:m]


def thin_to_price_durations(ticks: TickSeries, c: float) -> DurationSeries:
    """Price durations with their start times; no duration spans two days."""
    vals, starts = [], []
    for et, _ in thin_events(ticks, c):
        if et.size < 2:
            log.info("day with no completed price duration skipped")
            continue
        d = np.diff(et)
        keep = d > 0
        vals.append(d[keep])
        starts.append(et[:-1][keep])
    if not vals:
        raise ValueError("no price durations produced")
    return DurationSeries(np.concatenate(vals), np.concatenate(starts))


# --------------------------------------------------------------------------- #
def silverman_bandwidth(x, floor: float = 900.0) -> float:
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25])) / 1.349
    spread = min(sd, iqr) if iqr > 0 else sd
    return max(0.9 * spread * x.size ** (-0.2), floor)


def _nw(x, y, grid, h, block: int = 256):
    out = np.empty(grid.size)
    for s in range(0, grid.size, block):
        g = grid[s : s + block, None]
        w = np.exp(-0.5 * ((g - x[None, :]) / h) ** 2)
        out[s : s + block] = (w @ y) / w.sum(axis=1)
    return out


@dataclass
class SeasonalProfile:
    """Per-weekday expected duration as a function of local time of day."""

    grid: np.ndarray
    values: dict
    bandwidth: dict
    tz: str = "America/Chicago"

    def evaluate(self, timestamps) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(timestamps, dtype=float))
        loc = pd.to_datetime(ts, unit="s", utc=True).tz_convert(self.tz)
        tod = np.asarray(loc.hour * 3600 + loc.minute * 60 + loc.second + ts % 1.0, dtype=float)
        wd = np.asarray(loc.dayofweek)
        out = np.empty(ts.size)
        for d in np.unique(wd):
            if int(d) not in self.values:
                raise KeyError(f"no seasonal profile for weekday {int(d)}")
            m = wd == d
            out[m] = np.interp(tod[m], self.grid, self.values[int(d)])
        return out

    def to_dict(self) -> dict:
        return {
            "tz": self.tz,
            "grid": self.grid.tolist(),
            "values": {str(k): v.tolist() for k, v in self.values.items()},
            "bandwidth": {str(k): v for k, v in self.bandwidth.items()},
        }


def fit_seasonal(
    durations: DurationSeries,
    session: SessionConfig | None = None,
    bandwidth: float | None = None,
    grid_step: float = 60.0,
    min_obs: int = 200,
) -> SeasonalProfile:
    """Nadaraya-Watson regression of duration on start time of day, per weekday.

    Gaussian kernel; the default bandwidth is Silverman's rule with a
    15-minute floor.
    """
    session = session or SessionConfig()
    if durations.start_timestamps is None:
        raise ValueError("seasonal fit needs start timestamps")
    if bandwidth is not None and not (np.isfinite(bandwidth) and bandwidth > 0):
        raise ValueError("bandwidth must be positive and finite")
    ts = durations.start_timestamps
    loc = pd.to_datetime(ts, unit="s", utc=True).tz_convert(session.tz)
    tod = np.asarray(loc.hour * 3600 + loc.minute * 60 + loc.second + ts % 1.0, dtype=float)
    wd = np.asarray(loc.dayofweek)
    grid = np.arange(session.open_s, session.close_s + grid_step, grid_step, dtype=float)
    values, bws = {}, {}
    for d in np.unique(wd):
        m = wd == d
        if m.sum() < min_obs:
            raise ValueError(f"weekday {int(d)} has {int(m.sum())} durations; need at least {min_obs}")
        h = silverman_bandwidth(tod[m]) if bandwidth is None else float(bandwidth)
        values[int(d)] = _nw(tod[m], durations.values[m], grid, h)
        bws[int(d)] = h
    return SeasonalProfile(grid, values, bws, session.tz)


def adjust(durations: DurationSeries, profile: SeasonalProfile) -> DurationSeries:
    """Divide each duration by the profile at its start time."""
    s = profile.evaluate(durations.start_timestamps)
    if np.any(s <= 0):
        raise ValueError("seasonal profile must be positive")
    return DurationSeries(durations.values / s, durations.start_timestamps, adjusted=True)


# --------------------------------------------------------------------------- #
def describe(values, dispersion: bool = True) -> dict:
    """Mean, median, extremes, spread, dispersion, skewness and Pearson kurtosis."""
    x = np.asarray(values.values if isinstance(values, DurationSeries) else values, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    mean = float(x.mean())
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return {
        "n": int(x.size),
        "mean": mean,
        "median": float(np.median(x)),
        "min": float(x.min()),
        "max": float(x.max()),
        "std": sd,
        "dispersion": sd / mean if dispersion and mean != 0 else None,
        "skewness": float(stats.skew(x)),
        "kurtosis": float(stats.kurtosis(x, fisher=False)),
    }


def describe_table(raw: DurationSeries, adjusted: DurationSeries) -> dict:
    """Columns ``raw``, ``adj`` and ``log-adj``; tail indices are not estimated."""
    return {
        "raw": describe(raw),
        "adj": describe(adjusted),
        "log-adj": describe(np.log(adjusted.values), dispersion=False),
    }


# --------------------------------------------------------------------------- #
def _u_shape(tod, open_s, close_s):
    z = (np.asarray(tod, dtype=float) - open_s) / (close_s - open_s)
    return 0.55 + 1.8 * (z - 0.5) ** 2 + 0.3 * z


def diurnal_layout(
    base,
    start_date: str = "2010-01-04",
    session: SessionConfig | None = None,
    shape=None,
) -> DurationSeries:
    """Lay unit-mean durations out on consecutive business-day sessions.

    Each duration is stretched by ``shape`` (time of day to multiplier,
    default U-shaped) at its start; a duration that would cross the close is
    dropped and the next day begins at the open. Returns raw durations with
    start timestamps.
    """
    session = session or SessionConfig()
    shape = shape or (lambda tod: _u_shape(tod, session.open_s, session.close_s))
    base = np.asarray(base, dtype=float)
    day = pd.Timestamp(start_date, tz=session.tz)
    vals, starts = [], []
    i = 0
    while i < base.size:
        if day.dayofweek >= 5:
            day += pd.Timedelta(days=1)
            continue
        t0 = day.timestamp()
        tod = float(session.open_s)
        while i < base.size:
            x = base[i] * float(shape(tod))
            if tod + x > session.close_s:
                i += 1
                break
            vals.append(x)
            starts.append(t0 + tod)
            tod += x
            i += 1
        day += pd.Timedelta(days=1)
    return DurationSeries(np.array(vals), np.array(starts))


def simulate_ticks(
    n_days: int,
    seed: int = 0,
    rate: float = 0.5,
    tick: float = 0.0001,
    p0: float = 1.0,
    session: SessionConfig | None = None,
    start_date: str = "2010-01-04",
) -> pd.DataFrame:
    """Synthetic ``timestamp,price`` ticks with a U-shaped intraday activity.

    Trades arrive as a Poisson process whose rate (per second) is
    ``rate / shape(tod)``; each trade moves the price by one tick up or down
    or leaves it unchanged.
    """
    session = session or SessionConfig()
    rng = np.random.default_rng(seed)
    o, c = session.open_s, session.close_s
    lam_max = rate / 0.55
    rows_t = []
    day = pd.Timestamp(start_date, tz=session.tz)
    done = 0
    while done < n_days:
        if day.dayofweek < 5:
            n = rng.poisson(lam_max * (c - o))
            tod = np.sort(rng.uniform(o, c, n))
            keep = rng.uniform(size=n) < (rate / _u_shape(tod, o, c)) / lam_max
            rows_t.append(day.timestamp() + np.floor(tod[keep]))
            done += 1
        day += pd.Timedelta(days=1)
    t = np.concatenate(rows_t)
    steps = rng.choice(np.array([-1, 0, 1]), t.size)
    ticks = np.maximum(np.round(p0 / tick) + np.cumsum(steps), 1)
    return pd.DataFrame({"timestamp": t, "price": np.round(ticks * tick, 10)})
