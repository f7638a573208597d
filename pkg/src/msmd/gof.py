"""Frequency-domain goodness-of-fit test based on the smoothed ratio ``I/f``.

Under a correct model the ratio ``I(w_i)/f(w_i)`` is flat, so its kernel
smooth ``f~`` is close to a constant. The statistic ``T_n`` is the mean of
``f~^2`` over the squared mean of ``f~`` and is centred and scaled by the
kernel constants ``C_n`` and ``D_n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .whittle import Periodogram, SpectralModel, periodogram

__all__ = ["GofResult", "bartlett", "default_bandwidth", "smoothing_weights", "c_n", "d_n", "gof_statistic"]


def bartlett(z):
    z = np.abs(np.asarray(z, dtype=float))
    return np.where(z <= 1.0, 1.0 - z, 0.0)


KERNELS = {"bartlett": bartlett}


def default_bandwidth(n: int) -> float:
    return 3.0 * n**0.4


def smoothing_weights(n: int, p_n: float, kernel=bartlett) -> np.ndarray:
    """Spectral window ``W(w_m) = (1/2pi) sum_{|h|<n} k(h/p_n) e^{-ihw_m}``, ``m = 0..n-1``.

    Lags ``h`` and ``h - n`` land on the same residue, so the lag weights are
    folded before a single FFT.
    """
    h = np.arange(n)
    a = kernel(h / p_n)
    a[1:] += kernel((n - h[1:]) / p_n)
    return np.fft.fft(a).real / (2 * math.pi)


def c_n(n: int, p_n: float, kernel=bartlett) -> float:
    l = np.arange(1, n)
    return float(np.sum((1 - l / n) * kernel(l / p_n) ** 2) / (n * math.pi) + 1 / (2 * math.pi))


def d_n(n: int, p_n: float, kernel=bartlett) -> float:
    l = np.arange(1, n - 1)
    return float(2 / math.pi**2 * np.sum((1 - l / n) * (1 - (l + 1) / n) * kernel(l / p_n) ** 4))


@dataclass(frozen=True)
class GofResult:
    t_n: float
    c_n: float
    d_n: float
    standardized: float
    pvalue: float
    bandwidth: float
    kernel: str
    n: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def __str__(self) -> str:
        return f"{self.standardized:.3f} ({self.pvalue:.3f})"


def gof_statistic(model: SpectralModel, theta, x, p_n: float | None = None, kernel: str = "bartlett") -> GofResult:
    """Standardized statistic ``n (T_n - C_n) / sqrt(D_n)`` and its upper-tail p-value.

    ``x`` is the series (or its ``Periodogram``). The zero frequency is left
    out of both the smoothing and the outer sums.
    """
    pg = x if isinstance(x, Periodogram) else periodogram(np.asarray(x, dtype=float))
    n = pg.n
    if n < 100:
        raise ValueError("the goodness-of-fit test is asymptotic; need n >= 100")
    kfun = KERNELS[kernel]
    p_n = default_bandwidth(n) if p_n is None else float(p_n)
    f = model.evaluate(theta, pg.freqs)
    if not np.all(f > 0):
        raise FloatingPointError("model spectral density is not strictly positive")
    r = np.concatenate([[0.0], pg.ordinates / f])
    W = smoothing_weights(n, p_n, kfun)
    ft = (2 * math.pi / n) * np.fft.ifft(np.fft.fft(W) * np.fft.fft(r)).real
    ft = ft[1:]
    s1 = (2 * math.pi / n) * ft.sum()
    s2 = (2 * math.pi / n) * np.sum(ft * ft)
    t = s2 / s1**2
    cn = c_n(n, p_n, kfun)
    dn = d_n(n, p_n, kfun)
    z = n * (t - cn) / math.sqrt(dn)
    return GofResult(float(t), cn, dn, float(z), float(norm.sf(z)), p_n, kernel, n)
