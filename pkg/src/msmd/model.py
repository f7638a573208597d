"""The MSMD process: parameters, exact simulation and closed-form moments.

A duration is ``X_i = psi_bar * prod_j M_{j,i} * eps_i`` where each of the
``k`` unit-mean multipliers is redrawn from its law with probability
``gamma_j = 1 - (1 - gamma_k) ** (b ** (j - k))`` at every step.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .laws import (
    Binomial,
    Exponential,
    InnovationLaw,
    LogNormal,
    MultiplierLaw,
    innovation_from_dict,
    multiplier_from_dict,
)

__all__ = [
    "MsmdParams",
    "DurationSeries",
    "make_rng",
    "switching_probabilities",
    "simulate",
    "acf_levels",
    "acf_logs",
    "spectral_density_levels",
    "spectral_density_logs",
    "MAX_LEVEL_SPECTRUM_K",
]

MAX_LEVEL_SPECTRUM_K = 20


def make_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """Counter-based generator for replication ``replication`` of run ``seed``.

    Every ``(seed, replication)`` pair gives an independent, reproducible stream.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication),))
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class MsmdParams:
    k: int
    b: float
    gamma_k: float
    multiplier: MultiplierLaw = field(default_factory=lambda: Binomial(1.4))
    innovation: InnovationLaw = field(default_factory=Exponential)
    psi_bar: float = 1.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not self.b > 1.0:
            raise ValueError(f"b must exceed 1, got {self.b}")
        if not (0.0 < self.gamma_k < 1.0):
            raise ValueError(f"gamma_k must lie in (0, 1), got {self.gamma_k}")
        if not self.psi_bar > 0:
            raise ValueError(f"psi_bar must be positive, got {self.psi_bar}")

    @property
    def is_binomial(self) -> bool:
        return isinstance(self.multiplier, Binomial)

    def gammas(self) -> np.ndarray:
        return switching_probabilities(self)

    def persistence(self) -> np.ndarray:
        """``1 - gamma_j`` for j = 1..k, computed without cancellation."""
        expo = float(self.b) ** (np.arange(1, self.k + 1) - self.k)
        return np.exp(expo * math.log1p(-self.gamma_k))

    def mean(self) -> float:
        return self.psi_bar

    def variance(self) -> float:
        return float(acf_levels(self, 0))

    def replace(self, **changes) -> "MsmdParams":
        d = dict(
            k=self.k,
            b=self.b,
            gamma_k=self.gamma_k,
            multiplier=self.multiplier,
            innovation=self.innovation,
            psi_bar=self.psi_bar,
        )
        d.update(changes)
        return MsmdParams(**d)

    def to_dict(self) -> dict:
        return {
            "model": "msmd",
            "k": int(self.k),
            "b": float(self.b),
            "gamma_k": float(self.gamma_k),
            "psi_bar": float(self.psi_bar),
            "multiplier": self.multiplier.to_dict(),
            "innovation": self.innovation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MsmdParams":
        return cls(
            k=int(d["k"]),
            b=float(d["b"]),
            gamma_k=float(d["gamma_k"]),
            multiplier=multiplier_from_dict(d["multiplier"]),
            innovation=innovation_from_dict(d.get("innovation", {"law": "exponential"})),
            psi_bar=float(d.get("psi_bar", 1.0)),
        )

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "MsmdParams":
        """Load from a JSON string or a path to a JSON file."""
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(source).read_text()
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class DurationSeries:
    """Strictly positive durations with optional start times (seconds)."""

    values: np.ndarray
    start_timestamps: np.ndarray | None = None
    adjusted: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("durations must be one-dimensional")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("durations must be strictly positive and finite")
        object.__setattr__(self, "values", v)
        if self.start_timestamps is not None:
            ts = np.asarray(self.start_timestamps, dtype=float)
            if ts.shape != v.shape:
                raise ValueError("start_timestamps must match durations in length")
            # each duration must end no later than the next one starts
            # (gaps are allowed, e.g. discarded overnight periods)
            end = ts[:-1] + v[:-1]
            if np.any(ts[1:] < end - 1e-9 * np.maximum(np.abs(end), 1.0)):
                raise ValueError("start_timestamps overlap the preceding durations")
            object.__setattr__(self, "start_timestamps", ts)

    def __len__(self) -> int:
        return self.values.size

    @property
    def logs(self) -> np.ndarray:
        return np.log(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "duration", "start_ts"])
            for i, x in enumerate(self.values):
                ts = "" if self.start_timestamps is None else f"{self.start_timestamps[i]:.6f}"
                w.writerow([i, repr(float(x)), ts])

    @classmethod
    def from_csv(cls, path, adjusted: bool = False) -> "DurationSeries":
        vals, ts = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "duration" not in reader.fieldnames:
                raise ValueError(f"{path}: expected header 'index,duration,start_ts'")
            for row in reader:
                vals.append(float(row["duration"]))
                raw = (row.get("start_ts") or "").strip()
                ts.append(float(raw) if raw else None)
        if any(t is None for t in ts):
            stamps = None
        else:
            stamps = np.array(ts, dtype=float)
        return cls(np.array(vals), stamps, adjusted)


# --------------------------------------------------------------------------- #
def switching_probabilities(params: MsmdParams) -> np.ndarray:
    """Ladder ``gamma_j = 1 - (1 - gamma_k) ** (b ** (j - k))``, j = 1..k."""
    g = -np.expm1(np.log(params.persistence()))
    g[-1] = params.gamma_k
    return g


def simulate(params: MsmdParams, n: int, seed: int = 0, replication: int = 0):
    """Draw ``n`` durations and the hidden multiplier path.

    The multipliers start from their stationary law. On a switch event the
    new value is a fresh draw, which for the binomial law repeats the current
    value half of the time.

    Returns
    -------
    series : DurationSeries
    states : ndarray, shape (n, k)
        Multiplier values ``M_{j,i}``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed, replication)
    k = params.k
    gam = switching_probabilities(params)

    switch = rng.random((n, k)) < gam
    switch[0, :] = True
    draws = params.multiplier.sample(rng, (n, k))
    eps = params.innovation.sample(rng, n)

    idx = np.where(switch, np.arange(n)[:, None], 0)
    np.maximum.accumulate(idx, axis=0, out=idx)
    states = np.take_along_axis(draws, idx, axis=0)

    x = params.psi_bar * np.prod(states, axis=1) * eps
    return DurationSeries(x), states


# --------------------------------------------------------------------------- #
def acf_levels(params: MsmdParams, h):
    """Autocovariance of durations at lag(s) ``h``."""
    h = np.abs(np.asarray(h))
    k = params.k
    m2 = params.multiplier.second_moment()
    var_m = params.multiplier.var()
    e2 = params.innovation.second_moment()
    rho = params.persistence()

    var0 = math.expm1(k * math.log(m2) + math.log(e2))
    hh = np.atleast_1d(h).astype(float)
    # log of prod_j [1 + varM rho_j^h]
    logprod = np.log1p(var_m * rho[None, :] ** hh[:, None]).sum(axis=1)
    out = np.where(hh == 0, var0, np.expm1(logprod)) * params.psi_bar**2
    return out[0] if np.ndim(h) == 0 else out


def _subset_tables(params: MsmdParams):
    """Per-subset ``varM^|S|`` and ``prod_{j in S} rho_j`` for all nonempty S."""
    k = params.k
    if k > MAX_LEVEL_SPECTRUM_K:
        raise ValueError(
            f"level spectrum enumerates 2^k - 1 terms; k={k} exceeds the limit "
            f"k <= {MAX_LEVEL_SPECTRUM_K}"
        )
    masks = np.arange(1, 2**k, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(k)[None, :]) & 1
    log_rho = np.log(params.persistence())
    log_rho_s = bits @ log_rho
    rho_s = np.exp(log_rho_s)
    count = bits.sum(axis=1)
    var_m = params.multiplier.var()
    weight = var_m ** count.astype(float)
    return weight, rho_s, -np.expm1(log_rho_s)


def spectral_density_levels(params: MsmdParams, omega, chunk: int = 4096):
    """Spectral density of durations.

    ``2 pi f / psi_bar^2 = E(M^2)^k Var(eps)
    + sum_S varM^|S| (1 - r_S^2) / (1 + r_S^2 - 2 r_S cos w)``
    with ``r_S = prod_{j in S} (1 - gamma_j)`` over nonempty subsets S.
    """
    weight, rho_s, one_minus = _subset_tables(params)
    m2 = params.multiplier.second_moment()
    var_eps = params.innovation.second_moment() - 1.0
    const = math.exp(params.k * math.log(m2)) * var_eps

    w = np.atleast_1d(np.asarray(omega, dtype=float))
    sin2 = np.sin(0.5 * w) ** 2
    out = np.empty_like(w)
    num = weight * one_minus * (1.0 + rho_s)
    d0 = one_minus**2
    for start in range(0, w.size, chunk):
        s2 = sin2[start : start + chunk, None]
        out[start : start + chunk] = (num[None, :] / (d0[None, :] + 4.0 * rho_s[None, :] * s2)).sum(axis=1)
    out = (const + out) * params.psi_bar**2 / (2 * math.pi)
    return out[0] if np.ndim(omega) == 0 else out


# --------------------------------------------------------------------------- #
def acf_logs(params: MsmdParams, h):
    """Autocovariance of log-durations at lag(s) ``h``."""
    sm2 = params.multiplier.log_var()
    se2 = params.innovation.log_var()
    hh = np.abs(np.atleast_1d(np.asarray(h))).astype(float)
    rho = params.persistence()
    out = sm2 * (rho[None, :] ** hh[:, None]).sum(axis=1)
    out = np.where(hh == 0, params.k * sm2 + se2, out)
    return out[0] if np.ndim(h) == 0 else out


def _ar1_kernel(rho, one_minus_rho, sin2):
    """``(1 - r^2) / (1 + r^2 - 2 r cos w)`` and its derivative in ``r``.

    The denominator is formed as ``(1 - r)^2 + 4 r sin^2(w/2)`` so that it
    stays accurate when ``r`` is within rounding of 1 and ``w`` is near 0.
    """
    d = one_minus_rho**2 + 4.0 * rho * sin2
    num = one_minus_rho * (1.0 + rho)
    val = num / d
    dval = (-2.0 * rho * d - num * (4.0 * sin2 - 2.0 * one_minus_rho)) / d**2
    return val, dval


def spectral_density_logs(params: MsmdParams, omega, grad: bool = False):
    """Spectral density of log-durations, optionally with its gradient.

    The gradient is taken with respect to the Whittle parameter vector
    ``(multiplier parameter, b, gamma_k[, innovation parameter])`` and has
    shape ``(p, len(omega))``.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    sin2 = np.sin(0.5 * w)[None, :] ** 2
    k, b, gk = params.k, float(params.b), float(params.gamma_k)
    sm2 = params.multiplier.log_var()
    se2 = params.innovation.log_var()

    j = np.arange(1, k + 1)
    expo = b ** (j - k).astype(float)
    log1m = math.log1p(-gk)
    rho = np.exp(expo * log1m)[:, None]
    kern, dkern = _ar1_kernel(rho, -np.expm1(expo * log1m)[:, None], sin2)
    ksum = kern.sum(axis=0)
    f = (sm2 * ksum + se2) / (2 * math.pi)
    if not grad:
        return f[0] if np.ndim(omega) == 0 else f

    drho_db = rho * log1m * ((j - k) * b ** (j - k - 1.0))[:, None]
    drho_dg = rho * (-expo / (1.0 - gk))[:, None]
    rows = [
        params.multiplier.dlog_var() * ksum / (2 * math.pi),
        sm2 * (dkern * drho_db).sum(axis=0) / (2 * math.pi),
        sm2 * (dkern * drho_dg).sum(axis=0) / (2 * math.pi),
    ]
    if params.innovation.param_name is not None:
        rows.append(np.full_like(ksum, params.innovation.dlog_var() / (2 * math.pi)))
    g = np.vstack(rows)
    if np.ndim(omega) == 0:
        return f[0], g[:, 0]
    return f, g
