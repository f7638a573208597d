"""Whittle quasi-likelihood estimation on log-durations.

The objective is ``Q_n = (1/n) sum_{i=1}^{n-1} [log f(w_i) + I(w_i) / f(w_i)]``
over the Fourier frequencies ``w_i = 2 pi i / n``. Because ``I`` and ``f``
are even, ordinates ``i`` and ``n - i`` coincide; the sums below run over the
lower half with weight 2 (weight 1 for the Nyquist ordinate), which gives the
same numbers at half the cost.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from .laws import make_innovation, make_multiplier
from .model import MsmdParams, spectral_density_logs
from .optim import ConvergenceError, boundary_flags, multistart_minimize

__all__ = [
    "Periodogram",
    "periodogram",
    "SpectralModel",
    "MsmdSpectrum",
    "FlatSpectrum",
    "WhittleFit",
    "ConvergenceError",
    "IdentificationError",
    "whittle_objective",
    "fit_whittle",
    "covariance_plugin",
    "covariance_neweywest",
    "MSMD_BOX",
]

# Search box used for MSMD estimation.
MSMD_BOX = {
    "m0": (1.001, 1.999),
    "lambda": (0.001, 10.0),
    "b": (1.001, 10.0),
    "gamma_k": (0.001, 0.999),
    "kappa": (0.2, 10.0),
    "s2": (0.01, 10.0),
}


class IdentificationError(np.linalg.LinAlgError):
    """Singular curvature matrix; ``direction`` is the ill-identified eigenvector."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Periodogram:
    freqs: np.ndarray
    ordinates: np.ndarray
    n: int

    def half(self):
        """Frequencies, ordinates and weights over ``i = 1..floor(n/2)``."""
        m = self.n // 2
        w = np.full(m, 2.0)
        if self.n % 2 == 0:
            w[-1] = 1.0
        return self.freqs[:m], self.ordinates[:m], w


def periodogram(x) -> Periodogram:
    """Periodogram ``|sum_j x_j e^{-i w j}|^2 / (2 pi n)`` at ``w_i, i = 1..n-1``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 16:
        raise ValueError("periodogram needs at least 16 observations")
    dft = np.fft.fft(x - x.mean())
    ords = (dft.real**2 + dft.imag**2)[1:] / (2 * math.pi * n)
    freqs = 2 * math.pi * np.arange(1, n) / n
    return Periodogram(freqs, ords, n)


# --------------------------------------------------------------------------- #
class SpectralModel:
    """Parametric spectral density ``f(w; theta)`` with analytic gradient.

    Subclasses define ``names``, ``bounds`` and ``evaluate``/``gradient``.
    """

    names: tuple[str, ...] = ()
    bounds: tuple[tuple[float, float], ...] = ()

    @property
    def dim(self) -> int:
        return len(self.names)

    def evaluate(self, theta, omega) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, theta, omega):
        """Return ``(f, df/dtheta)`` with the gradient of shape ``(p, len(omega))``."""
        raise NotImplementedError

    def hessian(self, theta, omega, rel_step: float = 1e-5) -> np.ndarray:
        """Second derivatives of ``f``, shape ``(p, p, len(omega))``.

        Central differences of the analytic gradient.
        """
        theta = np.asarray(theta, dtype=float)
        p = theta.size
        omega = np.atleast_1d(omega)
        out = np.empty((p, p, omega.size))
        for a in range(p):
            h = rel_step * max(abs(theta[a]), 1.0)
            tp, tm = theta.copy(), theta.copy()
            tp[a] += h
            tm[a] -= h
            out[a] = (self.gradient(tp, omega)[1] - self.gradient(tm, omega)[1]) / (2 * h)
        return 0.5 * (out + out.transpose(1, 0, 2))

    def fourth_cumulant(self, theta) -> float | None:
        """Fourth cumulant of the i.i.d. noise when the signal is Gaussian.

        ``None`` means no closed-form trispectrum is available.
        """
        return None


class MsmdSpectrum(SpectralModel):
    """Log-duration spectrum of an MSMD model with ``k`` multipliers."""

    def __init__(self, k: int, multiplier: str = "binomial", innovation: str = "exponential"):
        if multiplier not in ("binomial", "lognormal"):
            raise ValueError(f"unknown multiplier law {multiplier!r}")
        if innovation not in ("exponential", "weibull", "lognormal"):
            raise ValueError(f"unknown innovation law {innovation!r}")
        self.k = int(k)
        self.multiplier = multiplier
        self.innovation = innovation
        mname = "m0" if multiplier == "binomial" else "lambda"
        names = [mname, "b", "gamma_k"]
        if innovation == "weibull":
            names.append("kappa")
        elif innovation == "lognormal":
            names.append("s2")
        self.names = tuple(names)
        self.bounds = tuple(MSMD_BOX[nm] for nm in self.names)

    def __repr__(self):
        return f"MsmdSpectrum(k={self.k}, multiplier={self.multiplier!r}, innovation={self.innovation!r})"

    def to_params(self, theta, psi_bar: float = 1.0) -> MsmdParams:
        theta = np.asarray(theta, dtype=float)
        inno = make_innovation(self.innovation, theta[3] if theta.size > 3 else None)
        return MsmdParams(
            k=self.k,
            b=float(theta[1]),
            gamma_k=float(theta[2]),
            multiplier=make_multiplier(self.multiplier, float(theta[0])),
            innovation=inno,
            psi_bar=psi_bar,
        )

    @staticmethod
    def theta_of(params: MsmdParams) -> np.ndarray:
        theta = [params.multiplier.param, params.b, params.gamma_k]
        if params.innovation.param is not None:
            theta.append(params.innovation.param)
        return np.array(theta, dtype=float)

    def evaluate(self, theta, omega):
        return spectral_density_logs(self.to_params(theta), omega)

    def gradient(self, theta, omega):
        return spectral_density_logs(self.to_params(theta), omega, grad=True)

    def fourth_cumulant(self, theta):
        if self.multiplier != "lognormal":
            return None
        return self.to_params(theta).innovation.log_cum4()


class FlatSpectrum(SpectralModel):
    """White noise, ``f = c``."""

    names = ("c",)
    bounds = ((1e-8, 1e8),)

    def evaluate(self, theta, omega):
        return np.full(np.shape(np.atleast_1d(omega)), float(np.asarray(theta).ravel()[0]))

    def gradient(self, theta, omega):
        f = self.evaluate(theta, omega)
        return f, np.ones((1, f.size))

    def hessian(self, theta, omega, rel_step=1e-5):
        return np.zeros((1, 1, np.atleast_1d(omega).size))

    def fourth_cumulant(self, theta):
        return 0.0


# --------------------------------------------------------------------------- #
def _check_positive(f):
    if not np.all(f > 0) or not np.all(np.isfinite(f)):
        raise FloatingPointError("model spectral density is not strictly positive and finite")


def whittle_objective(model: SpectralModel, theta, pgram: Periodogram, grad: bool = False):
    """Negative Whittle log-likelihood ``Q_n(theta)`` (and its gradient)."""
    w, ords, wt = pgram.half()
    if grad:
        f, df = model.gradient(theta, w)
    else:
        f = model.evaluate(theta, w)
    _check_positive(f)
    ratio = ords / f
    q = float(np.sum(wt * (np.log(f) + ratio)) / pgram.n)
    if not grad:
        return q
    g = df @ (wt * (1.0 - ratio) / f) / pgram.n
    return q, g


# --------------------------------------------------------------------------- #
@dataclass
class WhittleFit:
    theta: np.ndarray
    names: tuple
    objective: float
    n: int
    covariance: np.ndarray | None = None
    variant: str | None = None
    bandwidth: int | None = None
    converged: bool = True
    boundary: dict = field(default_factory=dict)
    n_starts: int = 0
    model: SpectralModel | None = field(default=None, repr=False)

    @property
    def stderr(self) -> np.ndarray | None:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    @property
    def q_loglik(self) -> float:
        """Reported quasi log-likelihood, ``-(n/2) (Q_n + log 2 pi)``."""
        return -0.5 * self.n * (self.objective + math.log(2 * math.pi))

    def params(self, psi_bar: float = 1.0) -> MsmdParams:
        if not isinstance(self.model, MsmdSpectrum):
            raise TypeError("params() is only defined for MSMD fits")
        return self.model.to_params(self.theta, psi_bar)

    def to_dict(self) -> dict:
        return {
            "estimator": "whittle",
            "model": repr(self.model),
            "names": list(self.names),
            "theta": [float(v) for v in self.theta],
            "stderr": None if self.stderr is None else [float(v) for v in self.stderr],
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "objective": self.objective,
            "q_loglik": self.q_loglik,
            "q_loglik_convention": "-(n/2) * (Q_n + log(2*pi))",
            "n": self.n,
            "variant": self.variant,
            "bandwidth": self.bandwidth,
            "converged": self.converged,
            "boundary": self.boundary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fit_whittle(
    model: SpectralModel,
    x,
    box=None,
    n_starts: int = 5,
    seed: int = 0,
    start=None,
    covariance: str | None = None,
    bandwidth: int | None = None,
    n_screen: int = 256,
) -> WhittleFit:
    """Minimise ``Q_n`` over ``box`` with multi-start L-BFGS-B.

    A Latin hypercube of ``n_screen`` box points is scored by ``Q_n``; each
    coordinate range is cut into ``n_starts`` slices and the best screened
    point of every slice becomes a starting value (plus ``start`` if given).
    The local searches run in a logistic transform of the box.
    ``covariance`` may be ``"plugin"``, ``"neweywest"`` or ``"auto"``
    (closed form when the model has a Gaussian signal, Newey-West otherwise).
    """
    pgram = x if isinstance(x, Periodogram) else periodogram(np.asarray(x, dtype=float))
    bounds = np.array(box if box is not None else model.bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    res = multistart_minimize(
        lambda th: whittle_objective(model, th, pgram, grad=True),
        lo,
        hi,
        jac=True,
        n_starts=n_starts,
        n_screen=n_screen,
        seed=seed,
        start=start,
    )
    theta = res.x
    fit = WhittleFit(
        theta=theta,
        names=tuple(model.names),
        objective=res.fun,
        n=pgram.n,
        converged=res.success,
        boundary=boundary_flags(theta, model.names, lo, hi),
        n_starts=res.n_starts,
        model=model,
    )
    if covariance is not None:
        variant = covariance
        if variant == "auto":
            variant = "plugin" if model.fourth_cumulant(theta) is not None else "neweywest"
        if variant == "plugin":
            fit.covariance = covariance_plugin(model, theta, pgram)
        elif variant == "neweywest":
            bw = 20 if bandwidth is None else bandwidth
            fit.covariance = covariance_neweywest(model, theta, pgram, bw)
            fit.bandwidth = bw
        else:
            raise ValueError(f"unknown covariance variant {covariance!r}")
        fit.variant = variant
    return fit


# --------------------------------------------------------------------------- #
def curvature(model: SpectralModel, theta, pgram: Periodogram, form: str = "hessian") -> np.ndarray:
    """Curvature matrix of ``Q_n``.

    ``form="hessian"`` is the exact second derivative of ``Q_n``;
    ``form="opg"`` is ``(1/n) sum g g'`` with ``g = d log f / d theta``.
    """
    w, ords, wt = pgram.half()
    f, df = model.gradient(theta, w)
    g = df / f
    opg = (g * wt) @ g.T / pgram.n
    if form == "opg":
        return opg
    if form != "hessian":
        raise ValueError(f"unknown curvature form {form!r}")
    r = ords / f
    hf = model.hessian(theta, w)
    term1 = np.einsum("abi,i->ab", hf, wt * (1.0 - r) / f) / pgram.n
    term2 = (g * (wt * (2.0 * r - 1.0))) @ g.T / pgram.n
    m = term1 + term2
    return 0.5 * (m + m.T)


def _sandwich(m, v, n, names):
    evals, evecs = np.linalg.eigh(m)
    mags = np.abs(evals)
    j = int(np.argmin(mags))
    if mags[j] <= 1e-10 * max(mags.max(), 1e-300):
        d = evecs[:, j]
        desc = ", ".join(f"{nm}:{c:+.3f}" for nm, c in zip(names, d))
        raise IdentificationError(f"curvature matrix is singular along ({desc})", d)
    minv = np.linalg.inv(m)
    cov = minv @ v @ minv / n
    return 0.5 * (cov + cov.T)


def covariance_plugin(
    model: SpectralModel,
    theta,
    pgram: Periodogram,
    fourth_cumulant: float | None = None,
    form: str = "hessian",
) -> np.ndarray:
    """Closed-form sandwich ``M^-1 V M^-1 / n``.

    ``V = (2/n) sum g g' + (2 pi / n^2) S (sum g/f)(sum g/f)'`` with the
    constant trispectrum ``S = kappa_4 / (2 pi)^3`` of i.i.d. noise added to a
    Gaussian signal. ``fourth_cumulant`` defaults to the model's own value;
    it is zero when the whole process is Gaussian.
    """
    theta = np.asarray(theta, dtype=float)
    if fourth_cumulant is None:
        fourth_cumulant = model.fourth_cumulant(theta)
        if fourth_cumulant is None:
            raise ValueError(
                "no closed-form trispectrum for this model; pass fourth_cumulant or use covariance_neweywest"
            )
    n = pgram.n
    w, _, wt = pgram.half()
    f, df = model.gradient(theta, w)
    g = df / f
    v = 2.0 * (g * wt) @ g.T / n
    if fourth_cumulant:
        s = fourth_cumulant / (2 * math.pi) ** 3
        a = (g / f) @ wt
        v = v + 2 * math.pi / n**2 * s * np.outer(a, a)
    m = curvature(model, theta, pgram, form)
    return _sandwich(m, v, n, model.names)


def score_terms(model: SpectralModel, theta, pgram: Periodogram) -> np.ndarray:
    """Per-frequency scores ``dq_i/dtheta`` for ``i = 1..n-1``, shape ``(n-1, p)``."""
    f, df = model.gradient(theta, pgram.freqs)
    return (df * ((1.0 - pgram.ordinates / f) / f)).T


def newey_west_outer(s: np.ndarray, bandwidth: int) -> np.ndarray:
    """``(1/n) [sum s_i s_i' + sum_b (1 - b/(B+1)) sum_i (s_i s_{i-b}' + s_{i-b} s_i')]``
    with ``n = len(s) + 1``."""
    n = s.shape[0] + 1
    v = s.T @ s
    for b in range(1, bandwidth + 1):
        c = s[b:].T @ s[:-b]
        v += (1.0 - b / (bandwidth + 1.0)) * (c + c.T)
    return v / n


def covariance_neweywest(model: SpectralModel, theta, pgram: Periodogram, bandwidth: int, form: str = "hessian"):
    """Sandwich covariance with a Bartlett-weighted estimate of ``V``.

    Scores at ``w_i`` and ``w_{n-i}`` are identical, so the sum over
    ``i = 1..n-1`` counts every frequency twice; the mirrored pairs are
    perfectly correlated and contribute a factor 2 that a local lag window
    cannot see. It is applied explicitly.
    """
    bandwidth = int(bandwidth)
    if bandwidth < 0 or bandwidth > pgram.n / 4:
        raise ValueError("bandwidth must satisfy 0 <= B <= n/4")
    theta = np.asarray(theta, dtype=float)
    s = score_terms(model, theta, pgram)
    v = 2.0 * newey_west_outer(s, bandwidth)
    m = curvature(model, theta, pgram, form)
    return _sandwich(m, v, pgram.n, model.names)
