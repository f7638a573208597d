"""Simulate-and-refit Monte Carlo harnesses for estimator accuracy and test size."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .gof import gof_statistic
from .mle import fit_mle
from .model import MsmdParams, simulate
from .optim import ConvergenceError
from .whittle import MsmdSpectrum, fit_whittle, periodogram

__all__ = ["McResult", "GofSizeResult", "run_mc", "gof_size"]

log = logging.getLogger(__name__)


def _spectrum_for(truth: MsmdParams, k: int | None) -> MsmdSpectrum:
    return MsmdSpectrum(k or truth.k, truth.multiplier.tag, truth.innovation.tag)


@dataclass
class McResult:
    """Replication estimates with their mean and spread per parameter."""

    estimator: str
    names: tuple
    truth: np.ndarray
    estimates: np.ndarray
    n: int
    converged: np.ndarray
    boundary_hits: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def R(self) -> int:
        return self.estimates.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.estimates.mean(axis=0)

    @property
    def sd(self) -> np.ndarray:
        return self.estimates.std(axis=0, ddof=1) if self.R > 1 else np.full(len(self.names), np.nan)

    @property
    def se(self) -> np.ndarray:
        return self.sd / math.sqrt(self.R)

    @property
    def bias(self) -> np.ndarray:
        return self.mean - self.truth

    def table(self) -> list[list[str]]:
        """One row per parameter: truth, replication mean and, in parentheses, SD."""
        rows = [["param", "truth", f"n={self.n}"]]
        for i, nm in enumerate(self.names):
            rows.append([nm, f"{self.truth[i]:.3f}", f"{self.mean[i]:.3f} ({self.sd[i]:.3f})"])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.table())
        return buf.getvalue()

    def replications_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replication", *self.names, "converged"])
        for r, (row, ok) in enumerate(zip(self.estimates, self.converged)):
            w.writerow([r, *(f"{v:.10g}" for v in row), int(ok)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "names": list(self.names),
            "truth": self.truth.tolist(),
            "n": self.n,
            "R": self.R,
            "mean": self.mean.tolist(),
            "sd": [float(v) for v in self.sd],
            "se": [float(v) for v in self.se],
            "n_converged": int(self.converged.sum()),
            "boundary_hits": self.boundary_hits,
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def run_mc(
    estimator: str,
    truth: MsmdParams,
    n: int,
    R: int,
    seed: int = 0,
    k_fit: int | None = None,
    n_starts: int = 5,
) -> McResult:
    """``R`` replications of simulate then fit.

    ``estimator`` is ``"whittle"`` (on log durations) or ``"mle"``. A fit that
    exhausts its restarts contributes its best point and is flagged as not
    converged.
    """
    if R < 1 or n < 1:
        raise ValueError("R and n must be positive")
    if estimator == "mle":
        if not truth.is_binomial:
            raise ValueError("exact maximum likelihood needs a finite state space; it does not apply to log-normal multipliers")
        if truth.innovation.tag not in ("exponential", "weibull"):
            raise ValueError("MLE supports exponential and Weibull innovations")
        names = ("m0", "b", "gamma_k") + (("kappa",) if truth.innovation.tag == "weibull" else ())
        true = MsmdSpectrum.theta_of(truth)
    elif estimator == "whittle":
        spec = _spectrum_for(truth, k_fit)
        names = spec.names
        true = spec.theta_of(truth)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    est = np.empty((R, len(names)))
    ok = np.ones(R, dtype=bool)
    hits = 0
    for r in range(R):
        x, _ = simulate(truth, n, seed, r)
        try:
            if estimator == "mle":
                fit = fit_mle(x, k_fit or truth.k, truth.innovation.tag, n_starts=n_starts, seed=seed + r)
            else:
                fit = fit_whittle(spec, np.log(x.values), n_starts=n_starts, seed=seed + r)
            est[r] = fit.theta
            hits += bool(fit.boundary)
        except ConvergenceError as err:
            log.warning("replication %d did not converge: %s", r, err)
            est[r] = err.best
            ok[r] = False
    meta = {"seed": seed, "k_fit": k_fit or truth.k, "truth_params": truth.to_dict()}
    return McResult(estimator, tuple(names), np.asarray(true, dtype=float), est, n, ok, hits, meta)


@dataclass
class GofSizeResult:
    """Rejection frequencies of the goodness-of-fit test under the fitted true model."""

    levels: tuple
    rejections: np.ndarray
    pvalues: np.ndarray
    n: int
    bandwidth: float

    @property
    def R(self) -> int:
        return self.pvalues.size

    def table(self) -> list[list[str]]:
        rows = [["nominal", f"n={self.n}"]]
        for a, rate in zip(self.levels, self.rejections):
            rows.append([f"{100 * a:g}%", f"{100 * rate:.1f}"])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.table())
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "R": self.R,
            "bandwidth": self.bandwidth,
            "levels": list(self.levels),
            "rejection_rates": self.rejections.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def gof_size(
    truth: MsmdParams,
    n: int,
    R: int,
    seed: int = 0,
    levels=(0.10, 0.05, 0.01),
    n_starts: int = 5,
    p_n: float | None = None,
) -> GofSizeResult:
    """Simulate from ``truth``, fit by Whittle, and test the fitted model."""
    spec = _spectrum_for(truth, None)
    pv = np.empty(R)
    bw = float("nan")
    for r in range(R):
        y = np.log(simulate(truth, n, seed, r)[0].values)
        pg = periodogram(y)
        try:
            theta = fit_whittle(spec, pg, n_starts=n_starts, seed=seed + r).theta
        except ConvergenceError as err:
            theta = err.best
        res = gof_statistic(spec, theta, pg, p_n)
        pv[r] = res.pvalue
        bw = res.bandwidth
    rej = np.array([(pv < a).mean() for a in levels])
    return GofSizeResult(tuple(levels), rej, pv, n, bw)
