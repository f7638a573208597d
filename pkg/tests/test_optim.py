from __future__ import annotations

import numpy as np
import pytest

from msmd.optim import (
    ConvergenceError,
    boundary_flags,
    from_unit,
    multistart_minimize,
    numerical_hessian,
    to_unit,
)

LO = np.array([-2.0, 0.0])
HI = np.array([3.0, 5.0])


def test_unit_transform_round_trip():
    th = np.array([0.3, 4.2])
    np.testing.assert_allclose(from_unit(to_unit(th, LO, HI), LO, HI), th, rtol=1e-12)


def test_finds_interior_minimum_with_and_without_gradient():
    target = np.array([1.0, 2.0])
    f = lambda t: float(np.sum((t - target) ** 2))  # noqa: E731
    fg = lambda t: (f(t), 2 * (t - target))  # noqa: E731
    for fun, jac in ((f, False), (fg, True)):
        res = multistart_minimize(fun, LO, HI, jac=jac, n_starts=3, seed=1)
        np.testing.assert_allclose(res.x, target, atol=1e-5)
        assert res.success


def test_picks_global_of_two_basins():
    # narrow deep well at 2.5, broad shallow well at -1
    f = lambda t: -np.exp(-((t[0] + 1) ** 2)) - 2 * np.exp(-((t[0] - 2.5) ** 2) / 0.01) + 0.1 * (t[1] - 1) ** 2  # noqa: E731
    res = multistart_minimize(f, LO, HI, n_starts=10, n_screen=512, seed=0)
    assert res.x[0] == pytest.approx(2.5, abs=1e-3)


def test_non_finite_regions_are_avoided():
    def f(t):
        if t[0] < 0:
            raise FloatingPointError
        return (t[0] - 1) ** 2 + (t[1] - 1) ** 2

    res = multistart_minimize(f, LO, HI, n_starts=3, seed=2)
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-4)


def test_convergence_error_carries_best_point():
    f = lambda t: float(np.sum(t**2))  # noqa: E731
    with pytest.raises(ConvergenceError) as info:
        multistart_minimize(f, LO, HI, n_starts=2, seed=0, maxiter=1, accept_gtol=0.0)
    assert info.value.best is not None and info.value.best.shape == (2,)


def test_no_starts_is_an_error():
    with pytest.raises(ValueError):
        multistart_minimize(lambda t: 0.0, LO, HI, n_starts=0)


def test_boundary_flags():
    flags = boundary_flags([-2.0 + 1e-5, 2.0], ["a", "b"], LO, HI)
    assert flags == {"a": "lower"}
    assert boundary_flags([0.0, 5.0], ["a", "b"], LO, HI) == {"b": "upper"}


def test_numerical_hessian_quadratic_interior_and_edge():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    f = lambda t: 0.5 * t @ A @ t  # noqa: E731
    H, one = numerical_hessian(f, np.array([0.5, 2.0]), LO, HI)
    np.testing.assert_allclose(H, A, rtol=1e-5)
    assert one == []
    H, one = numerical_hessian(f, np.array([0.5, 0.0]), LO, HI)
    np.testing.assert_allclose(H, A, rtol=1e-4)
    assert one == [1]
