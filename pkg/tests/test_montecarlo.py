from __future__ import annotations

import numpy as np
import pytest

from msmd.laws import Binomial, LogNormal
from msmd.model import MsmdParams
from msmd.montecarlo import gof_size, run_mc

TRUTH = MsmdParams(k=4, b=3.0, gamma_k=0.5, multiplier=Binomial(1.4))


def test_whittle_mc_shapes_and_summary():
    res = run_mc("whittle", TRUTH, 2000, 3, seed=1, n_starts=2)
    assert res.estimates.shape == (3, 3) and res.names == ("m0", "b", "gamma_k")
    np.testing.assert_allclose(res.truth, [1.4, 3.0, 0.5])
    np.testing.assert_allclose(res.bias, res.estimates.mean(axis=0) - res.truth)
    d = res.to_dict()
    assert d["R"] == 3 and d["k_fit"] == 4
    assert res.to_csv().splitlines()[1].startswith("m0,1.400,")
    assert len(res.replications_csv().splitlines()) == 4


def test_replications_are_reproducible():
    a = run_mc("whittle", TRUTH, 1000, 2, seed=5, n_starts=2)
    b = run_mc("whittle", TRUTH, 1000, 2, seed=5, n_starts=2)
    np.testing.assert_array_equal(a.estimates, b.estimates)


def test_single_replication_has_nan_spread():
    res = run_mc("mle", TRUTH, 800, 1, seed=2, k_fit=2, n_starts=2)
    assert np.all(np.isnan(res.sd)) and res.meta["k_fit"] == 2


def test_estimator_checks():
    ln = MsmdParams(k=4, b=3.0, gamma_k=0.5, multiplier=LogNormal(0.1))
    with pytest.raises(ValueError, match="finite state space"):
        run_mc("mle", ln, 100, 1)
    with pytest.raises(ValueError):
        run_mc("gmm", TRUTH, 100, 1)
    with pytest.raises(ValueError):
        run_mc("whittle", TRUTH, 100, 0)


def test_gof_size_smoke():
    res = gof_size(TRUTH, 500, 4, seed=3, n_starts=2)
    assert res.pvalues.shape == (4,) and np.all((0 <= res.pvalues) & (res.pvalues <= 1))
    assert res.rejections.shape == (3,) and np.all(np.diff(res.rejections) <= 0)
    assert res.table()[1][0] == "10%" and res.to_dict()["R"] == 4
