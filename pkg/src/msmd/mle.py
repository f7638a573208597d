"""Exact likelihood and optimal forecasts for the binomial MSMD.

The hidden state is the vector of ``k`` binomial multipliers, coded as a
``k``-bit integer: bit ``j`` is 0 when multiplier ``j + 1`` equals ``m0`` and
1 when it equals ``2 - m0``. The transition matrix is the Kronecker product
of ``k`` symmetric 2x2 factors with off-diagonal ``gamma_j / 2``, so a
prediction step is ``k`` passes of pairwise mixing over the state vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .laws import Binomial, Exponential, LogNormalInnovation, Weibull, make_innovation
from .model import DurationSeries, MsmdParams
from .optim import ConvergenceError, boundary_flags, multistart_minimize, numerical_hessian

__all__ = [
    "MAX_FILTER_K",
    "MLE_BOX",
    "StateSpace",
    "FilterResult",
    "MleFit",
    "filter_loglik",
    "forward_filter",
    "fit_mle",
    "optimal_forecast",
    "forecast_paths",
    "ConvergenceError",
]

MAX_FILTER_K = 12

MLE_BOX = {"m0": (1.001, 1.999), "b": (1.001, 10.0), "gamma_k": (0.001, 0.999), "kappa": (0.2, 10.0)}

_EXP, _WEIBULL, _LOGNORMAL = 0, 1, 2


def _innovation_code(innovation):
    if isinstance(innovation, Exponential):
        return _EXP, 0.0
    if isinstance(innovation, Weibull):
        return _WEIBULL, innovation.kappa
    if isinstance(innovation, LogNormalInnovation):
        return _LOGNORMAL, innovation.s2
    raise TypeError(f"unsupported innovation law {innovation!r}")


def state_products(m0: float, k: int) -> np.ndarray:
    """``prod_j M_j`` for every state, ordered by the bit coding above."""
    g = np.ones(1 << k)
    idx = np.arange(1 << k)
    for j in range(k):
        g *= np.where((idx >> j) & 1, 2.0 - m0, m0)
    return g


@dataclass(frozen=True)
class StateSpace:
    """Kronecker-factored transition structure of a binomial MSMD."""

    k: int
    m0: float
    gammas: np.ndarray

    @classmethod
    def from_params(cls, params: MsmdParams) -> "StateSpace":
        _require_binomial(params)
        return cls(params.k, params.multiplier.m0, params.gammas())

    @property
    def n_states(self) -> int:
        return 1 << self.k

    @property
    def state_products(self) -> np.ndarray:
        return state_products(self.m0, self.k)

    def factors(self) -> list[np.ndarray]:
        """Per-multiplier 2x2 transition matrices ``P_j``."""
        out = []
        for gj in self.gammas:
            q = 0.5 * gj
            out.append(np.array([[1 - q, q], [q, 1 - q]]))
        return out

    def dense(self) -> np.ndarray:
        """Full ``2^k x 2^k`` transition matrix (small ``k`` only)."""
        if self.k > 10:
            raise ValueError("dense transition matrix limited to k <= 10")
        P = np.ones((1, 1))
        for Pj in self.factors():
            P = np.kron(Pj, P)  # multiplier j on bit j
        return P

    def predict(self, probs: np.ndarray, steps: int = 1) -> np.ndarray:
        out = np.array(probs, dtype=float, copy=True)
        half = 0.5 * np.asarray(self.gammas, dtype=float)
        for _ in range(steps):
            _predict_inplace(out, half)
        return out


@numba.njit(cache=True)
def _predict_inplace(p, half_gammas):
    ns = p.size
    for j in range(half_gammas.size):
        q = half_gammas[j]
        stride = 1 << j
        for base in range(0, ns, 2 * stride):
            for t in range(base, base + stride):
                a = p[t]
                b = p[t + stride]
                p[t] = a + q * (b - a)
                p[t + stride] = b + q * (a - b)


@numba.njit(cache=True)
def _forward(x, g, half_gammas, psi_bar, code, par, store):
    n = x.size
    ns = g.size
    p = np.full(ns, 1.0 / ns)
    le = np.empty(ns)
    hist = np.empty((n if store else 0, ns))
    # log density of x = c * eps is log f_eps(x / c) - log c
    inv = 1.0 / (psi_bar * g)
    logc = np.log(psi_bar * g)
    if code == 1:
        xi = math.gamma(1.0 + 1.0 / par)
        const = math.log(par) + par * math.log(xi)
        invk = (xi * inv) ** par
    elif code == 2:
        const = -0.5 * math.log(2 * math.pi * par)
    loglik = 0.0
    for i in range(n):
        if i > 0:
            _predict_inplace(p, half_gammas)
        xv = x[i]
        lx = math.log(xv)
        xk = xv**par if code == 1 else 0.0
        mx = -np.inf
        for s in range(ns):
            if code == 0:
                v = -xv * inv[s] - logc[s]
            elif code == 1:
                v = const + (par - 1.0) * (lx - logc[s]) - invk[s] * xk - logc[s]
            else:
                lu = lx - logc[s]
                v = const - lx - (lu + 0.5 * par) ** 2 / (2 * par)
            le[s] = v
            if v > mx:
                mx = v
        tot = 0.0
        for s in range(ns):
            p[s] *= math.exp(le[s] - mx)
            tot += p[s]
        for s in range(ns):
            p[s] /= tot
        loglik += math.log(tot) + mx
        if store:
            hist[i] = p
    return loglik, p, hist


@dataclass
class FilterResult:
    loglik: float
    final_probs: np.ndarray
    filtered_probs: np.ndarray | None = None


def _require_binomial(params: MsmdParams):
    if not isinstance(params.multiplier, Binomial):
        raise TypeError("exact filtering needs binomial multipliers; the log-normal state space is continuous")
    if params.k > MAX_FILTER_K:
        raise ValueError(f"k={params.k} exceeds the filter limit k <= {MAX_FILTER_K}")


def _values(data) -> np.ndarray:
    x = data.values if isinstance(data, DurationSeries) else np.asarray(data, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("durations must be a non-empty vector")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("durations must be positive and finite")
    return x


def forward_filter(x, m0, gammas, psi_bar=1.0, innovation=None, store=False) -> FilterResult:
    """Normalised forward recursion with an explicit switching-probability vector."""
    x = _values(x)
    gammas = np.ascontiguousarray(gammas, dtype=float)
    k = gammas.size
    if k > MAX_FILTER_K:
        raise ValueError(f"k={k} exceeds the filter limit k <= {MAX_FILTER_K}")
    code, par = _innovation_code(innovation or Exponential())
    ll, p, hist = _forward(x, state_products(m0, k), 0.5 * gammas, float(psi_bar), code, float(par), store)
    return FilterResult(float(ll), p, hist if store else None)


def filter_loglik(params: MsmdParams, data, store: bool = False) -> FilterResult:
    """Exact log-likelihood of ``data`` under a binomial MSMD, stationary start."""
    _require_binomial(params)
    return forward_filter(data, params.multiplier.m0, params.gammas(), params.psi_bar, params.innovation, store)


# --------------------------------------------------------------------------- #
def optimal_forecast(params: MsmdParams, final_probs, h: int) -> float:
    """``E(X_{n+h} | F_n) = psi_bar * pi_n P^h g``."""
    if h < 1:
        raise ValueError("horizon must be >= 1")
    ss = StateSpace.from_params(params)
    return float(params.psi_bar * ss.predict(final_probs, h) @ ss.state_products)


@numba.njit(cache=True)
def _paths(probs, half_gammas, g, H):
    m = probs.shape[0]
    out = np.empty((m, H))
    p = np.empty(probs.shape[1])
    for r in range(m):
        p[:] = probs[r]
        for h in range(H):
            _predict_inplace(p, half_gammas)
            out[r, h] = np.dot(p, g)
    return out


def forecast_paths(params: MsmdParams, probs, max_h: int) -> np.ndarray:
    """Optimal forecasts for ``h = 1..max_h`` from each row of filtered probabilities."""
    _require_binomial(params)
    probs = np.ascontiguousarray(np.atleast_2d(probs), dtype=float)
    g = state_products(params.multiplier.m0, params.k)
    return params.psi_bar * _paths(probs, 0.5 * params.gammas(), g, int(max_h))


# --------------------------------------------------------------------------- #
@dataclass
class MleFit:
    params: MsmdParams
    names: tuple
    theta: np.ndarray
    stderr: np.ndarray
    loglik: float
    n: int
    converged: bool = True
    boundary: dict = field(default_factory=dict)
    one_sided: list = field(default_factory=list)
    n_starts: int = 0
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "estimator": "mle",
            "model": "msmd",
            "params": self.params.to_dict(),
            "names": list(self.names),
            "theta": [float(v) for v in self.theta],
            "stderr": [float(v) for v in self.stderr],
            "loglik": self.loglik,
            "n": self.n,
            "converged": self.converged,
            "boundary": self.boundary,
            "one_sided_hessian": [self.names[i] for i in self.one_sided],
            "n_starts": self.n_starts,
            "message": self.message,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fit_mle(
    data,
    k: int,
    innovation: str = "exponential",
    box: dict | None = None,
    n_starts: int = 5,
    n_screen: int = 128,
    seed: int = 0,
    start=None,
) -> MleFit:
    """Maximise the exact likelihood over ``(m0, b, gamma_k[, kappa])``.

    ``psi_bar`` is fixed at the sample mean. Standard errors come from the
    inverse of a finite-difference Hessian of the log-likelihood.
    """
    x = _values(data)
    if x.size < 100:
        raise ValueError("fit_mle needs at least 100 observations")
    if k > MAX_FILTER_K:
        raise ValueError(f"k={k} exceeds the filter limit k <= {MAX_FILTER_K}")
    if innovation not in ("exponential", "weibull"):
        raise ValueError("innovation must be 'exponential' or 'weibull'")
    names = ["m0", "b", "gamma_k"] + (["kappa"] if innovation == "weibull" else [])
    box = {**MLE_BOX, **(box or {})}
    lo = np.array([box[nm][0] for nm in names])
    hi = np.array([box[nm][1] for nm in names])
    psi_bar = float(x.mean())
    n = x.size
    idx = np.arange(1 << k)
    bits = np.array([(idx >> j) & 1 for j in range(k)])
    rel = np.arange(1, k + 1) - k

    def loglik(theta):
        m0, b, gk = theta[0], theta[1], theta[2]
        code, par = (_WEIBULL, theta[3]) if innovation == "weibull" else (_EXP, 0.0)
        g = np.prod(np.where(bits, 2.0 - m0, m0), axis=0)
        gam = -np.expm1(np.power(b, rel) * math.log1p(-gk))
        return _forward(x, g, 0.5 * gam, psi_bar, code, par, False)[0]

    res = multistart_minimize(
        lambda th: -loglik(th) / n,
        lo,
        hi,
        n_starts=n_starts,
        n_screen=n_screen,
        seed=seed,
        start=start,
        gtol=1e-8,
        accept_gtol=1e-4,
    )
    theta = res.x
    H, one_sided = numerical_hessian(loglik, theta, lo, hi)
    try:
        cov = np.linalg.inv(-H)
        se = np.sqrt(np.where(np.diag(cov) > 0, np.diag(cov), np.nan))
    except np.linalg.LinAlgError:
        se = np.full(len(names), np.nan)
    params = MsmdParams(
        k=k,
        b=float(theta[1]),
        gamma_k=float(theta[2]),
        multiplier=Binomial(float(theta[0])),
        innovation=make_innovation(innovation, float(theta[3]) if innovation == "weibull" else None),
        psi_bar=psi_bar,
    )
    return MleFit(
        params=params,
        names=tuple(names),
        theta=theta,
        stderr=se,
        loglik=float(loglik(theta)),
        n=n,
        converged=res.success,
        boundary=boundary_flags(theta, names, lo, hi),
        one_sided=one_sided,
        n_starts=res.n_starts,
        message=res.message,
    )
