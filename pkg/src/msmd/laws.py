"""Unit-mean multiplier and innovation distributions.

Each law knows its raw moments on the level scale (needed for the duration
autocovariances) and its log-scale variance (needed for the log-duration
spectrum), and can draw samples from a ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gamma as gamma_fn

EULER_GAMMA = 0.5772156649015329


# --------------------------------------------------------------------------- #
# Multiplier laws
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Binomial:
    """Multiplier taking ``m0`` or ``2 - m0`` with probability 1/2 each."""

    m0: float

    tag = "binomial"
    param_name = "m0"

    def __post_init__(self):
        if not (1.0 < self.m0 < 2.0):
            raise ValueError(f"binomial m0 must lie in (1, 2), got {self.m0}")

    @property
    def param(self) -> float:
        return self.m0

    @property
    def values(self) -> tuple[float, float]:
        return (self.m0, 2.0 - self.m0)

    def var(self) -> float:
        return (self.m0 - 1.0) ** 2

    def second_moment(self) -> float:
        return 1.0 + self.var()

    def log_var(self) -> float:
        return (0.5 * math.log(self.m0 / (2.0 - self.m0))) ** 2

    def dlog_var(self) -> float:
        """Derivative of ``log_var`` with respect to ``m0``."""
        half_log = 0.5 * math.log(self.m0 / (2.0 - self.m0))
        return half_log * (1.0 / self.m0 + 1.0 / (2.0 - self.m0))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.where(rng.random(size) < 0.5, self.m0, 2.0 - self.m0)

    def to_dict(self) -> dict:
        return {"law": self.tag, "m0": self.m0}


@dataclass(frozen=True)
class LogNormal:
    """Multiplier with ``log M ~ N(-lam, 2 lam)``, so ``E(M) = 1``."""

    lam: float

    tag = "lognormal"
    param_name = "lambda"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"log-normal lambda must be positive, got {self.lam}")

    @property
    def param(self) -> float:
        return self.lam

    def var(self) -> float:
        return math.expm1(2.0 * self.lam)

    def second_moment(self) -> float:
        return math.exp(2.0 * self.lam)

    def log_var(self) -> float:
        return 2.0 * self.lam

    def dlog_var(self) -> float:
        return 2.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.exp(rng.normal(-self.lam, math.sqrt(2.0 * self.lam), size))

    def to_dict(self) -> dict:
        return {"law": self.tag, "lambda": self.lam}


MultiplierLaw = Union[Binomial, LogNormal]


# --------------------------------------------------------------------------- #
# Innovation laws
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Exponential:
    """Unit exponential innovations."""

    tag = "exponential"
    param_name = None

    @property
    def param(self):
        return None

    def second_moment(self) -> float:
        return 2.0

    def log_mean(self) -> float:
        return -EULER_GAMMA

    def log_var(self) -> float:
        return math.pi**2 / 6.0

    def dlog_var(self) -> float:
        return 0.0

    def log_cum4(self) -> float:
        """Fourth cumulant of ``log eps``."""
        return math.pi**4 / 15.0

    def logpdf(self, u):
        return -np.asarray(u, dtype=float)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.standard_exponential(size)

    def to_dict(self) -> dict:
        return {"law": self.tag}


@dataclass(frozen=True)
class Weibull:
    """Unit-mean Weibull innovations with shape ``kappa``.

    The scale is fixed at ``xi = Gamma(1 + 1/kappa)`` so that the density is
    ``kappa xi^kappa u^(kappa-1) exp(-(xi u)^kappa)``.
    """

    kappa: float

    tag = "weibull"
    param_name = "kappa"

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"Weibull kappa must be positive, got {self.kappa}")

    @property
    def param(self) -> float:
        return self.kappa

    @property
    def xi(self) -> float:
        return float(gamma_fn(1.0 + 1.0 / self.kappa))

    def second_moment(self) -> float:
        return float(gamma_fn(1.0 + 2.0 / self.kappa)) / self.xi**2

    def log_mean(self) -> float:
        return -EULER_GAMMA / self.kappa - math.log(self.xi)

    def log_var(self) -> float:
        return math.pi**2 / (6.0 * self.kappa**2)

    def dlog_var(self) -> float:
        return -(math.pi**2) / (3.0 * self.kappa**3)

    def log_cum4(self) -> float:
        return math.pi**4 / (15.0 * self.kappa**4)

    def logpdf(self, u):
        u = np.asarray(u, dtype=float)
        k, xi = self.kappa, self.xi
        return math.log(k) + k * math.log(xi) + (k - 1.0) * np.log(u) - (xi * u) ** k

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.weibull(self.kappa, size) / self.xi

    def to_dict(self) -> dict:
        return {"law": self.tag, "kappa": self.kappa}


@dataclass(frozen=True)
class LogNormalInnovation:
    """Unit-mean log-normal innovations, ``log eps ~ N(-s2/2, s2)``.

    Only used to build fully Gaussian log-duration processes.
    """

    s2: float

    tag = "lognormal"
    param_name = "s2"

    def __post_init__(self):
        if not self.s2 > 0:
            raise ValueError(f"log-normal innovation variance must be positive, got {self.s2}")

    @property
    def param(self) -> float:
        return self.s2

    def second_moment(self) -> float:
        return math.exp(self.s2)

    def log_mean(self) -> float:
        return -0.5 * self.s2

    def log_var(self) -> float:
        return self.s2

    def dlog_var(self) -> float:
        return 1.0

    def log_cum4(self) -> float:
        return 0.0

    def logpdf(self, u):
        lu = np.log(np.asarray(u, dtype=float))
        s2 = self.s2
        return -lu - 0.5 * math.log(2 * math.pi * s2) - (lu + 0.5 * s2) ** 2 / (2 * s2)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.exp(rng.normal(-0.5 * self.s2, math.sqrt(self.s2), size))

    def to_dict(self) -> dict:
        return {"law": self.tag, "s2": self.s2}


InnovationLaw = Union[Exponential, Weibull, LogNormalInnovation]


def log_moment_map(multiplier: MultiplierLaw, innovation: InnovationLaw) -> tuple[float, float]:
    """Map law parameters to ``(Var(log M), Var(log eps))``."""
    return multiplier.log_var(), innovation.log_var()


def multiplier_from_dict(d: dict) -> MultiplierLaw:
    law = d["law"].lower()
    if law == "binomial":
        return Binomial(float(d["m0"]))
    if law == "lognormal":
        return LogNormal(float(d.get("lambda", d.get("lam"))))
    raise ValueError(f"unknown multiplier law {d['law']!r}")


def innovation_from_dict(d: dict) -> InnovationLaw:
    law = d["law"].lower()
    if law == "exponential":
        return Exponential()
    if law == "weibull":
        return Weibull(float(d["kappa"]))
    if law == "lognormal":
        return LogNormalInnovation(float(d["s2"]))
    raise ValueError(f"unknown innovation law {d['law']!r}")


def make_multiplier(tag: str, value: float) -> MultiplierLaw:
    return Binomial(value) if tag == "binomial" else LogNormal(value)


def make_innovation(tag: str, value: float | None = None) -> InnovationLaw:
    if tag == "exponential":
        return Exponential()
    if tag == "weibull":
        return Weibull(value)
    if tag == "lognormal":
        return LogNormalInnovation(value)
    raise ValueError(f"unknown innovation law {tag!r}")
