"""Rival duration models: ACD(p, q) and the long-memory stochastic duration model.

ACD
    ``psi_i = omega + sum_j alpha_j x_{i-j} + sum_l beta_l psi_{i-l}``,
    ``x_i = psi_i eps_i``; exact conditional maximum likelihood with the
    recursion started at the sample mean.
LMSD
    ``x_i = exp(psi_i) eps_i`` with ``(1 - beta L) psi_i = omega + (1-L)^{-d} u_i``;
    Whittle estimation on log-durations and Kalman-filter forecasts from a
    truncated autoregressive representation of the latent process.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.linalg import solve_discrete_lyapunov, toeplitz
from scipy.special import gammaln

from .laws import Exponential, Weibull, innovation_from_dict, make_innovation
from .model import DurationSeries
from .optim import boundary_flags, multistart_minimize, numerical_hessian
from .whittle import SpectralModel, WhittleFit, covariance_plugin, fit_whittle, periodogram

__all__ = [
    "AcdParams",
    "AcdFit",
    "acd_filter",
    "acd_loglik",
    "fit_acd",
    "simulate_acd",
    "forecast_acd",
    "acd_forecast_paths",
    "acd_acf1",
    "LmsdParams",
    "LmsdSpectrum",
    "LmsdFit",
    "arfima_acvf",
    "lmsd_acf",
    "simulate_lmsd",
    "fit_lmsd_whittle",
    "ar_truncation",
    "LmsdKalman",
    "forecast_lmsd",
]


def _values(data) -> np.ndarray:
    x = data.values if isinstance(data, DurationSeries) else np.asarray(data, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("durations must be positive and finite")
    return x


# =========================================================================== #
# ACD
# =========================================================================== #
@dataclass(frozen=True)
class AcdParams:
    omega: float
    alpha: tuple = (0.1,)
    beta: tuple = (0.8,)
    innovation: object = field(default_factory=Exponential)

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in np.atleast_1d(self.alpha)))
        object.__setattr__(self, "beta", tuple(float(b) for b in np.atleast_1d(self.beta)))
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if min(self.alpha + self.beta, default=0.0) < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.persistence >= 1:
            raise ValueError("sum(alpha) + sum(beta) must be < 1 for stationarity")

    @property
    def p(self) -> int:
        return len(self.beta)

    @property
    def q(self) -> int:
        return len(self.alpha)

    @property
    def persistence(self) -> float:
        return sum(self.alpha) + sum(self.beta)

    @property
    def mean(self) -> float:
        return self.omega / (1.0 - self.persistence)

    def to_dict(self) -> dict:
        return {
            "model": "acd",
            "omega": self.omega,
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "innovation": self.innovation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AcdParams":
        return cls(float(d["omega"]), d["alpha"], d["beta"], innovation_from_dict(d.get("innovation", {"law": "exponential"})))


@numba.njit(cache=True)
def _acd_psi(x, omega, alpha, beta, init):
    n = x.size
    q = alpha.size
    p = beta.size
    psi = np.empty(n + 1)  # psi[i] is the conditional mean of x[i]; psi[n] is the next one
    for i in range(n + 1):
        v = omega
        for j in range(q):
            v += alpha[j] * (x[i - 1 - j] if i - 1 - j >= 0 else init)
        for l in range(p):
            v += beta[l] * (psi[i - 1 - l] if i - 1 - l >= 0 else init)
        psi[i] = v
    return psi


def acd_filter(params: AcdParams, data, init: float | None = None) -> np.ndarray:
    """Conditional means ``psi_1..psi_{n+1}``; pre-sample values set to ``init`` (sample mean)."""
    x = _values(data)
    init = float(x.mean()) if init is None else float(init)
    return _acd_psi(x, params.omega, np.array(params.alpha), np.array(params.beta), init)


def acd_loglik(params: AcdParams, data, init: float | None = None) -> float:
    x = _values(data)
    psi = acd_filter(params, x, init)[:-1]
    inno = params.innovation
    return float(np.sum(inno.logpdf(x / psi) - np.log(psi)))


def acd_acf1(params: AcdParams) -> float:
    """Lag-1 autocorrelation of durations for ACD(1,1) with unit-mean innovations."""
    if params.p != 1 or params.q != 1:
        raise ValueError("closed form implemented for ACD(1,1) only")
    a, b = params.alpha[0], params.beta[0]
    e2 = params.innovation.second_moment()
    s = a + b
    # Var(psi) / mu^2 from the squared recursion
    vpsi = a * a * (e2 - 1.0) / (1.0 - s * s - a * a * (e2 - 1.0))
    vx = e2 * (1.0 + vpsi) - 1.0
    return (a * e2 * (1.0 + vpsi) + b * (1.0 + vpsi) - s) / vx if vx > 0 else 0.0


def simulate_acd(params: AcdParams, n: int, seed: int = 0, replication: int = 0, burn: int = 2000) -> DurationSeries:
    from .model import make_rng

    rng = make_rng(seed, replication)
    eps = params.innovation.sample(rng, n + burn)
    x = _acd_sim(eps, params.omega, np.array(params.alpha), np.array(params.beta), params.mean)
    return DurationSeries(x[burn:])


@numba.njit(cache=True)
def _acd_sim(eps, omega, alpha, beta, init):
    n = eps.size
    x = np.empty(n)
    psi = np.empty(n)
    for i in range(n):
        v = omega
        for j in range(alpha.size):
            v += alpha[j] * (x[i - 1 - j] if i - 1 - j >= 0 else init)
        for l in range(beta.size):
            v += beta[l] * (psi[i - 1 - l] if i - 1 - l >= 0 else init)
        psi[i] = v
        x[i] = v * eps[i]
    return x


@dataclass
class AcdFit:
    params: AcdParams
    names: tuple
    theta: np.ndarray
    stderr: np.ndarray
    loglik: float
    n: int
    converged: bool = True
    boundary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "estimator": "mle",
            "model": "acd",
            "params": self.params.to_dict(),
            "names": list(self.names),
            "theta": [float(v) for v in self.theta],
            "stderr": [float(v) for v in self.stderr],
            "loglik": self.loglik,
            "n": self.n,
            "converged": self.converged,
            "boundary": self.boundary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _stick(s, v):
    """Split total ``s`` into ``len(v) + 1`` nonnegative shares by stick breaking."""
    out, rest = [], s
    for vi in v:
        out.append(rest * vi)
        rest -= rest * vi
    out.append(rest)
    return out


def fit_acd(
    data,
    p: int = 1,
    q: int = 1,
    innovation: str = "exponential",
    n_starts: int = 3,
    seed: int = 0,
    max_persistence: float = 0.9999,
) -> AcdFit:
    """Maximum likelihood for ACD(p, q).

    The search runs over ``(omega, s, shares[, kappa])`` where ``s`` is the
    persistence ``sum(alpha) + sum(beta)`` capped at ``max_persistence``, so
    the stationarity constraint holds by construction. An optimum on the cap
    is flagged in ``boundary``.
    """
    x = _values(data)
    if x.size < 200:
        raise ValueError("fit_acd needs at least 200 observations")
    if innovation not in ("exponential", "weibull"):
        raise ValueError("innovation must be 'exponential' or 'weibull'")
    mu = float(x.mean())
    init = mu
    m = p + q
    weib = innovation == "weibull"
    lo = [1e-6 * mu, 0.0] + [0.0] * (m - 1) + ([0.2] if weib else [])
    hi = [2.0 * mu, max_persistence] + [1.0] * (m - 1) + ([10.0] if weib else [])
    lo, hi = np.array(lo), np.array(hi)

    def natural(th):
        shares = _stick(th[1], th[2 : 2 + m - 1])
        alpha = np.array(shares[:q])
        beta = np.array(shares[q:])
        kappa = th[-1] if weib else None
        return th[0], alpha, beta, kappa

    def nll(th):
        om, al, be, kap = natural(th)
        psi = _acd_psi(x, om, al, be, init)[:-1]
        u = x / psi
        if weib:
            xi = math.exp(gammaln(1.0 + 1.0 / kap))
            ll = np.sum(math.log(kap) + kap * math.log(xi) + (kap - 1.0) * np.log(u) - (xi * u) ** kap - np.log(psi))
        else:
            ll = np.sum(-u - np.log(psi))
        return -ll / x.size

    res = multistart_minimize(nll, lo, hi, n_starts=n_starts, n_screen=64, seed=seed, gtol=1e-8, accept_gtol=1e-4)
    om, al, be, kap = natural(res.x)
    names = ["omega"] + [f"alpha{j + 1}" for j in range(q)] + [f"beta{l + 1}" for l in range(p)]
    theta = np.concatenate([[om], al, be] + ([[kap]] if weib else []))
    if weib:
        names.append("kappa")
    boundary = boundary_flags(res.x[:2], ["omega", "persistence"], lo[:2], hi[:2], tol=1e-4)

    # standard errors in natural coordinates
    def ll_nat(t):
        alpha, beta = t[1 : 1 + q], t[1 + q : 1 + q + p]
        psi = _acd_psi(x, t[0], alpha, beta, init)[:-1]
        if np.any(psi <= 0):
            return -np.inf
        inno = Weibull(t[-1]) if weib else Exponential()
        return float(np.sum(inno.logpdf(x / psi) - np.log(psi)))

    nlo = np.concatenate([[1e-9], np.zeros(m)] + ([[0.05]] if weib else []))
    nhi = np.concatenate([[10 * mu], np.ones(m)] + ([[20.0]] if weib else []))
    try:
        H, _ = numerical_hessian(ll_nat, theta, nlo, nhi, rel_step=1e-6)
        cov = np.linalg.inv(-H)
        se = np.sqrt(np.where(np.diag(cov) > 0, np.diag(cov), np.nan))
    except np.linalg.LinAlgError:
        se = np.full(theta.size, np.nan)
    params = AcdParams(float(om), tuple(al), tuple(be), make_innovation(innovation, kap))
    return AcdFit(params, tuple(names), theta, se, float(-res.fun * x.size), x.size, res.success, boundary)


def forecast_acd(params: AcdParams, history, h: int) -> float:
    """``E(x_{n+h} | F_n)`` for ACD(1,1)."""
    return float(acd_forecast_paths(params, history, [len(_values(history)) - 1], h)[0, h - 1])


def acd_forecast_paths(params: AcdParams, series, origins, max_h: int, init: float | None = None) -> np.ndarray:
    """Forecasts for ``h = 1..max_h`` from each origin index (last observed value).

    The one-step value is the recursion's ``psi_{t+1}``; further steps iterate
    ``omega + (alpha + beta) psi`` toward the unconditional mean.
    """
    if params.p != 1 or params.q != 1:
        raise NotImplementedError("multi-step ACD forecasts are implemented for (p, q) = (1, 1)")
    x = _values(series)
    psi = acd_filter(params, x, init)
    one = psi[np.asarray(origins, dtype=int) + 1]
    s = params.persistence
    out = np.empty((one.size, max_h))
    out[:, 0] = one
    for hh in range(1, max_h):
        out[:, hh] = params.omega + s * out[:, hh - 1]
    return out


# =========================================================================== #
# LMSD
# =========================================================================== #
@dataclass(frozen=True)
class LmsdParams:
    omega: float
    beta: float
    d: float
    sigma_u2: float
    innovation: object = field(default_factory=Exponential)

    def __post_init__(self):
        if not -1.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (-1, 1)")
        if not 0.0 <= self.d <= 0.5:
            raise ValueError("d must lie in [0, 0.5]")
        if self.sigma_u2 < 0:
            raise ValueError("sigma_u2 must be nonnegative")

    @property
    def psi_mean(self) -> float:
        return self.omega / (1.0 - self.beta)

    def to_dict(self) -> dict:
        return {
            "model": "lmsd",
            "omega": self.omega,
            "beta": self.beta,
            "d": self.d,
            "sigma_u2": self.sigma_u2,
            "innovation": self.innovation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LmsdParams":
        return cls(float(d["omega"]), float(d["beta"]), float(d["d"]), float(d["sigma_u2"]),
                   innovation_from_dict(d.get("innovation", {"law": "exponential"})))


def arfima_acvf(d: float, sigma2: float, nlags: int, beta: float = 0.0) -> np.ndarray:
    """Autocovariances ``0..nlags-1`` of ``(1 - beta L)(1 - L)^d z = u``, ``Var(u) = sigma2``.

    The fractional part uses ``g(0) = sigma2 Gamma(1-2d)/Gamma(1-d)^2`` and
    ``g(h) = g(h-1)(h-1+d)/(h-d)``. The AR(1) factor is applied by summing
    ``beta^|m| g(h+m) / (1 - beta^2)`` over ``m`` until the terms are negligible.
    """
    if not 0.0 <= d < 0.5:
        raise ValueError("ARFIMA autocovariances need 0 <= d < 0.5")
    if beta == 0.0:
        extra = 0
    else:
        extra = int(min(math.ceil(math.log(1e-17) / math.log(abs(beta))), 20000))
    H = nlags + extra + 1
    g = np.empty(H)
    g[0] = sigma2 * math.exp(gammaln(1 - 2 * d) - 2 * gammaln(1 - d))
    h = np.arange(1, H)
    g[1:] = g[0] * np.cumprod((h - 1 + d) / (h - d))
    if beta == 0.0:
        return g[:nlags]
    # g at lags -extra..nlags-1+extra, then a symmetric moving sum
    gs = g[np.abs(np.arange(-extra, nlags + extra))]
    wts = beta ** np.abs(np.arange(-extra, extra + 1))
    return np.convolve(gs, wts, mode="valid") / (1.0 - beta * beta)


def lmsd_acf(params: LmsdParams, h) -> np.ndarray:
    """Autocorrelation of LMSD durations at lags ``h >= 1``.

    With ``z`` Gaussian, ``corr(x_t, x_{t+h}) = (e^{g(h)} - 1) / (E(eps^2) e^{g(0)} - 1)``.
    """
    hs = np.atleast_1d(np.asarray(h, dtype=int))
    g = arfima_acvf(params.d, params.sigma_u2, int(hs.max()) + 1, params.beta)
    e2 = params.innovation.second_moment()
    out = np.expm1(g[hs]) / (e2 * math.exp(g[0]) - 1.0)
    return out[0] if np.ndim(h) == 0 else out


def _davies_harte(acvf: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Exact stationary Gaussian sample of length ``len(acvf)``."""
    n = acvf.size
    row = np.concatenate([acvf, acvf[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-8 * lam.max():
        raise np.linalg.LinAlgError("circulant embedding is not nonnegative definite")
    lam = np.clip(lam, 0, None)
    m = row.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.fft.fft(np.sqrt(lam / m) * z)
    return y.real[:n]


def simulate_lmsd(params: LmsdParams, n: int, seed: int = 0, replication: int = 0) -> DurationSeries:
    """Exact simulation of the latent ARFIMA(1, d, 0) by circulant embedding."""
    from .model import make_rng

    if params.d >= 0.5:
        raise ValueError("simulation needs d < 0.5")
    rng = make_rng(seed, replication)
    if params.sigma_u2 > 0:
        ac = arfima_acvf(params.d, params.sigma_u2, n, params.beta)
        z = _davies_harte(ac, rng)
    else:
        z = np.zeros(n)
    psi = params.psi_mean + z
    eps = params.innovation.sample(rng, n)
    return DurationSeries(np.exp(psi) * eps)


class LmsdSpectrum(SpectralModel):
    """Log-duration spectrum ``s2u/2pi |1-e^{-iw}|^{-2d} |1-beta e^{-iw}|^{-2} + s2e/2pi``."""

    def __init__(self, innovation: str = "exponential"):
        if innovation not in ("exponential", "weibull"):
            raise ValueError("innovation must be 'exponential' or 'weibull'")
        self.innovation = innovation
        self.names = ("beta", "d", "sigma_u2") + (("kappa",) if innovation == "weibull" else ())
        self.bounds = ((-0.99, 0.99), (0.0, 0.5), (1e-6, 10.0)) + (((0.2, 10.0),) if innovation == "weibull" else ())

    def __repr__(self):
        return f"LmsdSpectrum(innovation={self.innovation!r})"

    def _law(self, theta):
        return make_innovation(self.innovation, theta[3] if len(theta) > 3 else None)

    def gradient(self, theta, omega):
        theta = np.asarray(theta, dtype=float)
        beta, d, s2u = theta[:3]
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        sin2 = np.sin(0.5 * w) ** 2
        A = 4.0 * sin2
        B = (1.0 - beta) ** 2 + 4.0 * beta * sin2
        core = np.exp(-d * np.log(A)) / B / (2 * math.pi)
        law = self._law(theta)
        f = s2u * core + law.log_var() / (2 * math.pi)
        g = np.empty((theta.size, w.size))
        g[0] = -s2u * core * (2.0 * (beta - 1.0) + 4.0 * sin2) / B
        g[1] = -s2u * core * np.log(A)
        g[2] = core
        if theta.size > 3:
            g[3] = law.dlog_var() / (2 * math.pi)
        return f, g

    def evaluate(self, theta, omega):
        return self.gradient(theta, omega)[0]

    def fourth_cumulant(self, theta):
        return self._law(np.asarray(theta, dtype=float)).log_cum4()


@dataclass
class LmsdFit:
    params: LmsdParams
    whittle: WhittleFit

    @property
    def stderr(self):
        return self.whittle.stderr

    @property
    def boundary(self) -> dict:
        return self.whittle.boundary

    def to_dict(self) -> dict:
        d = self.whittle.to_dict()
        d["model"] = "lmsd"
        d["params"] = self.params.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fit_lmsd_whittle(logdata, innovation: str = "exponential", n_starts: int = 5, seed: int = 0) -> LmsdFit:
    """Whittle fit of the LMSD spectrum on log-durations.

    ``omega`` follows from the sample mean of the logs and the fitted
    ``beta``. A ``d`` estimate on the 0.5 edge is reported in ``boundary``.
    """
    y = np.asarray(logdata, dtype=float)
    if y.size < 1000:
        raise ValueError("fit_lmsd_whittle needs at least 1000 observations")
    model = LmsdSpectrum(innovation)
    pg = periodogram(y)
    fit = fit_whittle(model, pg, n_starts=n_starts, seed=seed)
    try:
        fit.covariance = covariance_plugin(model, fit.theta, pg)
        fit.variant = "plugin"
    except np.linalg.LinAlgError:
        fit.covariance = None
    law = model._law(fit.theta)
    beta, d, s2u = (float(v) for v in fit.theta[:3])
    omega = (1.0 - beta) * (float(y.mean()) - law.log_mean())
    return LmsdFit(LmsdParams(omega, beta, d, s2u, law), fit)


def ar_truncation(beta: float, d: float, m: int) -> np.ndarray:
    """AR coefficients ``a_1..a_m`` with ``(1 - beta L)(1 - L)^d ~ 1 - sum a_j L^j``."""
    pi = np.empty(m + 1)
    pi[0] = 1.0
    for j in range(1, m + 1):
        pi[j] = pi[j - 1] * (j - 1 - d) / j
    c = pi.copy()
    c[1:] -= beta * pi[:-1]
    return -c[1:]


class LmsdKalman:
    """Kalman filter for ``log x_t = mu + z_t + e_t`` with ``z`` a truncated AR(m).

    ``mu = psi_mean + E log eps`` and ``Var(e) = Var(log eps)``. The initial
    state covariance solves the discrete Lyapunov equation of the AR(m)
    companion form, falling back to the exact ARFIMA autocovariances when the
    truncated recursion is not stationary.
    """

    def __init__(self, params: LmsdParams, m: int = 50):
        self.params = params
        self.m = int(m)
        law = params.innovation
        self.mu = params.psi_mean + law.log_mean()
        self.r = law.log_var()
        a = ar_truncation(params.beta, params.d, self.m)
        T = np.zeros((self.m, self.m))
        T[0] = a
        T[1:, :-1] = np.eye(self.m - 1)
        self.T = T
        self.q = params.sigma_u2
        Q = np.zeros((self.m, self.m))
        Q[0, 0] = self.q
        self.flags = []
        if self.q == 0:
            P0 = np.zeros((self.m, self.m))
        elif np.max(np.abs(np.linalg.eigvals(T))) < 1.0:
            P0 = solve_discrete_lyapunov(T, Q)
        else:
            self.flags.append("nonstationary-truncation")
            P0 = toeplitz(arfima_acvf(min(params.d, 0.4999), self.q, self.m, params.beta))
        self.P0 = 0.5 * (P0 + P0.T)

    def run(self, logx):
        """Filtered states ``s_{t|t}`` (n, m), their covariances' last value,
        one-step predictions of ``log x`` and innovations."""
        y = np.asarray(logx, dtype=float) - self.mu
        n, m = y.size, self.m
        T, r, q = self.T, self.r, self.q
        s = np.zeros(m)
        P = self.P0.copy()
        filt = np.empty((n, m))
        Pfilt = np.empty((n, m, m)) if n * m * m <= 2e7 else None
        pred = np.empty(n)
        innov = np.empty(n)
        fvar = np.empty(n)
        for t in range(n):
            if t > 0:
                s = T @ s
                P = T @ P @ T.T
                P[0, 0] += q
            F = P[0, 0] + r
            v = y[t] - s[0]
            K = P[:, 0] / F
            pred[t] = s[0]
            innov[t] = v
            fvar[t] = F
            s = s + K * v
            P = P - np.outer(K, P[0])
            P = 0.5 * (P + P.T)
            filt[t] = s
            if Pfilt is not None:
                Pfilt[t] = P
        if np.min(np.linalg.eigvalsh(P)) < -1e-10 * max(1.0, np.abs(P).max()):
            self.flags.append("resymmetrized-covariance")
        return {"states": filt, "covs": Pfilt, "last_cov": P, "pred": pred + self.mu, "innov": innov, "fvar": fvar}

    def forecast_paths(self, logx, origins, max_h: int) -> np.ndarray:
        """Duration forecasts ``exp(psi_mean + z_hat + Var/2)`` for ``h = 1..max_h``."""
        out = self.run(logx)
        origins = np.asarray(origins, dtype=int)
        states = out["states"][origins]
        rows = np.empty((max_h, self.m))
        v = np.zeros(self.m)
        v[0] = 1.0
        head = [1.0]
        for h in range(max_h):
            v = v @ self.T
            rows[h] = v
            head.append(v[0])
        zhat = states @ rows.T
        if out["covs"] is not None:
            covs = out["covs"][origins]
            pv = np.einsum("hm,omn,hn->oh", rows, covs, rows)
        else:
            pv = np.tile(np.einsum("hm,mn,hn->h", rows, out["last_cov"], rows), (origins.size, 1))
        pv += self.q * np.cumsum(np.square(head[:-1]))[None, :]
        return np.exp(self.params.psi_mean + zhat + 0.5 * pv)


def forecast_lmsd(params: LmsdParams, logdata, h: int, m: int = 50) -> float:
    """``E(x_{n+h} | log x_1..log x_n)`` under the log-normal predictive approximation."""
    y = np.asarray(logdata, dtype=float)
    return float(LmsdKalman(params, m).forecast_paths(y, [y.size - 1], h)[0, h - 1])
