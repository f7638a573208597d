"""Best-linear forecasting, forecast losses and forecast comparison.

Linear forecasts solve the Toeplitz normal equations
``Gamma_n phi = (c(h), ..., c(n+h-1))'`` with a Levinson-type recursion that
accepts an arbitrary right-hand side, and are applied in mean-deviation form.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import norm

from .model import MsmdParams, acf_levels

__all__ = [
    "HORIZONS",
    "AcvProvider",
    "SingularToeplitzError",
    "levinson_solve",
    "linear_weights",
    "linear_forecast_paths",
    "cumulative_forecast",
    "cumulative_paths",
    "realized_cumulative",
    "losses",
    "DmResult",
    "diebold_mariano",
    "combine_equal",
    "ForecastReport",
    "build_report",
]

HORIZONS = (1, 5, 10, 20)


class SingularToeplitzError(np.linalg.LinAlgError):
    """A reflection coefficient reached the unit circle."""


@dataclass(frozen=True)
class AcvProvider:
    """Autocovariance function ``c(h)`` and process mean."""

    acv: Callable[[np.ndarray], np.ndarray]
    mean: float = 0.0

    def __call__(self, h) -> np.ndarray:
        return np.asarray(self.acv(np.asarray(h)), dtype=float)

    @classmethod
    def from_array(cls, c, mean: float = 0.0) -> "AcvProvider":
        c = np.asarray(c, dtype=float)

        def acv(h):
            h = np.abs(np.asarray(h, dtype=int))
            out = np.zeros(h.shape)
            ok = h < c.size
            out[ok] = c[h[ok]]
            return out

        return cls(acv, mean)

    @classmethod
    def from_msmd(cls, params: MsmdParams) -> "AcvProvider":
        return cls(lambda h: acf_levels(params, h), params.psi_bar)


# --------------------------------------------------------------------------- #
def levinson_solve(c, rhs, tol: float = 1e-10) -> np.ndarray:
    """Solve ``toeplitz(c) X = rhs`` for symmetric positive definite Toeplitz.

    ``c`` holds ``c(0..n-1)``; ``rhs`` is ``(n,)`` or ``(n, m)``. Cost is
    ``O(n^2)`` per right-hand side. Raises ``SingularToeplitzError`` when a
    reflection coefficient has magnitude ``>= 1 - tol``.
    """
    c = np.asarray(c, dtype=float)
    b = np.asarray(rhs, dtype=float)
    vec = b.ndim == 1
    if vec:
        b = b[:, None]
    n = c.size
    if b.shape[0] != n:
        raise ValueError("rhs length must equal the Toeplitz order")
    if not c[0] > 0:
        raise SingularToeplitzError("c(0) must be positive")
    r = c[1:] / c[0]
    b = b / c[0]
    x = np.zeros_like(b)
    x[0] = b[0]
    if n == 1:
        return x[:, 0] if vec else x
    y = np.zeros(n - 1)
    y[0] = -r[0]
    alpha = -r[0]
    beta = 1.0
    if abs(alpha) >= 1 - tol:
        raise SingularToeplitzError(f"reflection coefficient {alpha:.12g} on the unit circle")
    for k in range(1, n):
        beta *= 1.0 - alpha * alpha
        mu = (b[k] - r[:k][::-1] @ x[:k]) / beta
        x[:k] += np.outer(y[:k][::-1], mu)
        x[k] = mu
        if k < n - 1:
            alpha = (-r[k] - r[:k][::-1] @ y[:k]) / beta
            if abs(alpha) >= 1 - tol:
                raise SingularToeplitzError(f"reflection coefficient {alpha:.12g} on the unit circle at order {k + 1}")
            y[:k] = y[:k] + alpha * y[:k][::-1]
            y[k] = alpha
    return x[:, 0] if vec else x


def linear_weights(acv: AcvProvider, n: int, h) -> np.ndarray:
    """Weights ``phi`` of ``X_{t+h} - mu ~ sum_j phi_j (X_{t+1-j} - mu)``.

    ``h`` may be an integer (returns ``(n,)``) or a sequence (returns
    ``(n, len(h))``).
    """
    if n < 1:
        raise ValueError("window must be >= 1")
    hs = np.atleast_1d(np.asarray(h, dtype=int))
    if np.any(hs < 1):
        raise ValueError("horizons must be >= 1")
    c = acv(np.arange(n))
    rhs = np.column_stack([acv(np.arange(hh, hh + n)) for hh in hs])
    w = levinson_solve(c, rhs)
    return w[:, 0] if np.ndim(h) == 0 else w


def linear_forecast_paths(acv: AcvProvider, series, origins, max_h: int, window: int = 1024) -> np.ndarray:
    """Forecasts of ``X_{t+h}`` for ``h = 1..max_h`` at each origin ``t``.

    ``origins`` are indices of the last observed value. Each origin uses the
    ``window`` most recent observations (fewer near the start).
    """
    x = np.asarray(series, dtype=float)
    origins = np.asarray(origins, dtype=int)
    if origins.size == 0:
        return np.empty((0, max_h))
    nwin = int(min(window, origins.min() + 1))
    w = linear_weights(acv, nwin, np.arange(1, max_h + 1))
    dev = x - acv.mean
    # rows: most recent first
    lagged = np.stack([dev[origins - j] for j in range(nwin)], axis=1)
    return acv.mean + lagged @ w


# --------------------------------------------------------------------------- #
def cumulative_forecast(point_forecasts, h: int) -> float:
    """``x_{n,h} = sum_{j=1..h} x_{n+j|n}``."""
    pf = np.asarray(point_forecasts, dtype=float)
    if h < 1 or h > pf.size:
        raise ValueError("need 1 <= h <= number of point forecasts")
    return float(pf[:h].sum())


def cumulative_paths(point_paths) -> np.ndarray:
    """Row-wise cumulative sums of an (origin x horizon) forecast matrix."""
    return np.cumsum(np.asarray(point_paths, dtype=float), axis=1)


def realized_cumulative(series, origins, horizons=HORIZONS) -> np.ndarray:
    """Actual ``sum_{j=1..h} X_{t+j}`` for each origin and horizon."""
    x = np.asarray(series, dtype=float)
    cs = np.concatenate([[0.0], np.cumsum(x)])
    origins = np.asarray(origins, dtype=int)
    if origins.max() + max(horizons) >= x.size:
        raise ValueError("origins too close to the end of the series for the longest horizon")
    return np.stack([cs[origins + 1 + h] - cs[origins + 1] for h in horizons], axis=1)


def losses(actuals, forecasts) -> tuple[float, float]:
    """``(MSE, MAD)`` over the evaluation window."""
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if a.shape != f.shape:
        raise ValueError("actuals and forecasts must have equal shape")
    if a.size == 0:
        raise ValueError("empty evaluation window")
    e = a - f
    return float(np.mean(e * e)), float(np.mean(np.abs(e)))


class DmResult(NamedTuple):
    stat: float
    pvalue: float
    lrv: float
    degenerate: bool


def diebold_mariano(lossdiff, bandwidth: int = 0) -> DmResult:
    """Diebold-Mariano statistic for a loss differential ``d = L_a - L_b``.

    The long-run variance uses Bartlett weights ``1 - b/(B+1)`` up to lag
    ``B = bandwidth``. Positive statistics mean model ``a`` has larger loss.
    An exactly zero differential returns ``(0, 1)``; a non-positive long-run
    variance otherwise is reported with ``degenerate=True`` and NaN results.
    """
    d = np.asarray(lossdiff, dtype=float)
    T = d.size
    if T < 30:
        raise ValueError("Diebold-Mariano test needs at least 30 loss differentials")
    if not np.any(d):
        return DmResult(0.0, 1.0, 0.0, False)
    dm = d - d.mean()
    lrv = float(dm @ dm) / T
    for b in range(1, int(bandwidth) + 1):
        lrv += 2.0 * (1.0 - b / (bandwidth + 1.0)) * float(dm[b:] @ dm[:-b]) / T
    # rounding residue of a constant differential counts as zero variance
    if not lrv > 1e-14 * float(d @ d) / T:
        return DmResult(math.nan, math.nan, lrv, True)
    stat = float(d.mean() / math.sqrt(lrv / T))
    return DmResult(stat, float(2 * norm.sf(abs(stat))), lrv, False)


def combine_equal(*forecast_sets) -> np.ndarray:
    """Equal-weight average of aligned forecast arrays."""
    if len(forecast_sets) < 2:
        raise ValueError("need at least two forecast sets")
    arrs = [np.asarray(f, dtype=float) for f in forecast_sets]
    if any(a.shape != arrs[0].shape for a in arrs):
        raise ValueError("forecast sets are misaligned")
    return np.mean(arrs, axis=0)


# --------------------------------------------------------------------------- #
def _marker(res: DmResult, level_hi=0.01, level_lo=0.05) -> str:
    """``*``/``**``: significantly lower loss than the benchmark; ``+``/``++``: higher."""
    if res.degenerate or not np.isfinite(res.stat):
        return ""
    stars = "**" if res.pvalue < level_hi else "*" if res.pvalue < level_lo else ""
    if not stars:
        return ""
    return stars if res.stat < 0 else stars.replace("*", "+")


@dataclass
class ForecastReport:
    """Cumulative forecasts, losses and Diebold-Mariano tests per model.

    ``cumulative[name]`` and ``actual`` are ``(origins, len(horizons))``.
    ``dm[(name, loss)][h_index]`` compares ``name`` with ``benchmark``
    (negative statistic means ``name`` is better).
    """

    horizons: tuple
    origins: np.ndarray
    actual: np.ndarray
    cumulative: dict
    benchmark: str | None = None
    mse: dict = field(default_factory=dict)
    mad: dict = field(default_factory=dict)
    dm: dict = field(default_factory=dict)

    @property
    def models(self) -> list[str]:
        return list(self.cumulative)

    def table(self, loss: str = "mse") -> list[list[str]]:
        """Rows ``[model, value+marker per horizon]`` mirroring the published layout."""
        vals = self.mse if loss == "mse" else self.mad
        rows = [["model"] + [f"h={h}" for h in self.horizons]]
        for m in self.models:
            row = [m]
            for j in range(len(self.horizons)):
                mk = ""
                if (m, loss) in self.dm:
                    mk = _marker(self.dm[(m, loss)][j])
                row.append(f"{vals[m][j]:.3f}{mk}")
            rows.append(row)
        return rows

    def to_csv(self, loss: str = "mse") -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.table(loss))
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "horizons": list(self.horizons),
            "n_origins": int(self.origins.size),
            "benchmark": self.benchmark,
            "mse": {m: list(map(float, v)) for m, v in self.mse.items()},
            "mad": {m: list(map(float, v)) for m, v in self.mad.items()},
            "dm": {
                f"{m}|{loss}": [{"h": h, "stat": r.stat, "pvalue": r.pvalue, "degenerate": r.degenerate}
                                for h, r in zip(self.horizons, res)]
                for (m, loss), res in self.dm.items()
            },
            "markers": "*/** lower loss than benchmark at 5%/1%; +/++ higher loss at 5%/1%",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def build_report(
    actual,
    cumulative: dict,
    origins,
    horizons=HORIZONS,
    benchmark: str | None = None,
    dm_bandwidth: Callable[[int], int] | None = None,
) -> ForecastReport:
    """Losses per model and horizon, with DM tests against ``benchmark``.

    ``dm_bandwidth(h)`` defaults to ``h - 1``.
    """
    actual = np.asarray(actual, dtype=float)
    bw = dm_bandwidth or (lambda h: h - 1)
    rep = ForecastReport(tuple(horizons), np.asarray(origins), actual, dict(cumulative), benchmark)
    for m, f in rep.cumulative.items():
        f = np.asarray(f, dtype=float)
        if f.shape != actual.shape:
            raise ValueError(f"forecasts for {m!r} are misaligned with the actuals")
        pairs = [losses(actual[:, j], f[:, j]) for j in range(len(horizons))]
        rep.mse[m] = [p[0] for p in pairs]
        rep.mad[m] = [p[1] for p in pairs]
    if benchmark is not None:
        fb = np.asarray(rep.cumulative[benchmark])
        for m, f in rep.cumulative.items():
            if m == benchmark:
                continue
            f = np.asarray(f)
            for loss, fn in (("mse", np.square), ("mad", np.abs)):
                d = fn(actual - f) - fn(actual - fb)
                rep.dm[(m, loss)] = [diebold_mariano(d[:, j], bw(h)) for j, h in enumerate(horizons)]
    return rep
