from __future__ import annotations

import math

import numpy as np
import pytest

from msmd.gof import bartlett, c_n, d_n, default_bandwidth, gof_statistic, smoothing_weights
from msmd.laws import Binomial
from msmd.model import MsmdParams, simulate
from msmd.whittle import FlatSpectrum, MsmdSpectrum, periodogram

TRUTH = MsmdParams(k=6, b=3.0, gamma_k=0.5, multiplier=Binomial(1.5))


def test_kernel_constants_against_direct_sums():
    n, p = 64, 8.0
    c = sum((1 - l / n) * max(0.0, 1 - l / p) ** 2 for l in range(1, n)) / (n * math.pi) + 1 / (2 * math.pi)
    d = 2 / math.pi**2 * sum((1 - l / n) * (1 - (l + 1) / n) * max(0.0, 1 - l / p) ** 4 for l in range(1, n - 1))
    assert c_n(n, p) == pytest.approx(c, rel=1e-12, abs=1e-12)
    assert d_n(n, p) == pytest.approx(d, rel=1e-12, abs=1e-12)


def test_bartlett_kernel():
    np.testing.assert_allclose(bartlett([-2, -1, -0.5, 0, 0.25, 1, 3]), [0, 0, 0.5, 1, 0.75, 0, 0])
    assert default_bandwidth(1000) == pytest.approx(3 * 1000**0.4)


def test_smoothing_weights_against_direct_sum():
    n, p = 50, 6.0
    W = smoothing_weights(n, p)
    h = np.arange(-(n - 1), n)
    for m in (0, 3, 17, 49):
        w = 2 * math.pi * m / n
        direct = np.sum(bartlett(h / p) * np.cos(h * w)) / (2 * math.pi)
        assert W[m] == pytest.approx(direct, abs=1e-13)


@pytest.mark.parametrize("n", [1024, 4096])
def test_smoothing_weights_are_normalised(n):
    W = smoothing_weights(n, default_bandwidth(n))
    assert (2 * math.pi / n) * W.sum() == pytest.approx(1.0, abs=0.02)


def test_smoothed_ratio_matches_brute_force():
    # rebuild T_n with an explicit double sum over frequencies
    x = np.log(simulate(TRUTH, 200, seed=1)[0].values)
    model = MsmdSpectrum(6)
    theta = model.theta_of(TRUTH)
    res = gof_statistic(model, theta, x, p_n=5.0)
    pg = periodogram(x)
    n = pg.n
    ratio = pg.ordinates / model.evaluate(theta, pg.freqs)
    lags = np.arange(-(n - 1), n)
    kl = bartlett(lags / 5.0)
    ft = np.empty(n - 1)
    for a, wa in enumerate(pg.freqs):
        W = (kl[None, :] * np.cos(np.outer(wa - pg.freqs, lags))).sum(axis=1) / (2 * math.pi)
        ft[a] = (2 * math.pi / n) * np.sum(W * ratio)
    t = np.sum(ft**2) / np.sum(ft) ** 2 * n / (2 * math.pi)
    assert res.t_n == pytest.approx(t, rel=1e-10)
    assert res.standardized == pytest.approx(n * (t - res.c_n) / math.sqrt(res.d_n), rel=1e-9)


def test_invariance_to_adding_a_constant():
    x = np.log(simulate(TRUTH, 1000, seed=2)[0].values)
    model = MsmdSpectrum(6)
    a = gof_statistic(model, model.theta_of(TRUTH), x)
    b = gof_statistic(model, model.theta_of(TRUTH), x + 7.5)
    assert a.standardized == pytest.approx(b.standardized, rel=1e-9)


def test_result_fields_and_refusal():
    x = np.log(simulate(TRUTH, 500, seed=3)[0].values)
    res = gof_statistic(MsmdSpectrum(6), MsmdSpectrum.theta_of(TRUTH), x)
    assert res.d_n > 0 and 0 <= res.pvalue <= 1
    assert res.bandwidth == pytest.approx(default_bandwidth(500))
    assert res.to_dict()["kernel"] == "bartlett"
    assert str(res).count("(") == 1
    with pytest.raises(ValueError):
        gof_statistic(MsmdSpectrum(6), MsmdSpectrum.theta_of(TRUTH), x[:99])


def test_flat_spectrum_rejected_on_persistent_data():
    p = MsmdParams(k=8, b=2.0, gamma_k=0.5, multiplier=Binomial(1.6))
    x = np.log(simulate(p, 5000, seed=4)[0].values)
    pg = periodogram(x)
    _, ords, wt = pg.half()
    res = gof_statistic(FlatSpectrum(), [np.sum(wt * ords) / np.sum(wt)], pg)
    assert res.standardized > 10 and res.pvalue < 1e-6


def test_power_grows_with_misspecification_gap():
    medians = []
    for m0 in (1.15, 1.3, 1.45):
        p = MsmdParams(k=6, b=3.0, gamma_k=0.5, multiplier=Binomial(m0))
        z = []
        for r in range(9):
            pg = periodogram(np.log(simulate(p, 2000, seed=5, replication=r)[0].values))
            _, ords, wt = pg.half()
            z.append(gof_statistic(FlatSpectrum(), [np.sum(wt * ords) / np.sum(wt)], pg).standardized)
        medians.append(np.median(z))
    assert medians[0] < medians[1] < medians[2]
