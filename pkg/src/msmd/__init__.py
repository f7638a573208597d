"""Markov-switching multifractal duration (MSMD) models.

Simulation and closed-form moments live in :mod:`msmd.model`; estimation in
:mod:`msmd.mle` (exact filter) and :mod:`msmd.whittle` (frequency domain);
forecasting and evaluation in :mod:`msmd.forecast`; ACD and LMSD rivals in
:mod:`msmd.rivals`.
"""

from __future__ import annotations

from .laws import Binomial, Exponential, LogNormal, LogNormalInnovation, Weibull
from .model import (
    DurationSeries,
    MsmdParams,
    acf_levels,
    acf_logs,
    simulate,
    spectral_density_levels,
    spectral_density_logs,
    switching_probabilities,
)

__version__ = "0.1.0"

__all__ = [
    "Binomial",
    "LogNormal",
    "Exponential",
    "Weibull",
    "LogNormalInnovation",
    "MsmdParams",
    "DurationSeries",
    "simulate",
    "switching_probabilities",
    "acf_levels",
    "acf_logs",
    "spectral_density_levels",
    "spectral_density_logs",
]
